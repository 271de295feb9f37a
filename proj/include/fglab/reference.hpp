#pragma once

// Single-threaded reference versions of the OpenMP kernels. They share no
// code with the parallel paths beyond the scalar primitives and are kept for
// equivalence tests and the benchmark.

#include <cstdint>
#include <vector>

#include "fglab/datagen.hpp"
#include "fglab/flcore.hpp"
#include "fglab/numkit.hpp"

namespace fglab::serial {

Matrix pairwise_euclidean(const Matrix& rows);
Matrix similarity_matrix(const Matrix& updates);
Matrix madc_matrix(const Matrix& sim);
RoundOutcome fedavg_round(const ParamVector& global_w, const FederatedDataset& data,
                          const std::vector<int>& selected, const ModelSpec& spec,
                          const TrainParams& train, std::uint64_t seed, int round);

}  // namespace fglab::serial
