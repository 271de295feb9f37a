#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "fglab/error.hpp"
#include "fglab/models.hpp"
#include "fglab/rng.hpp"

namespace fglab {

struct ClientShard {
  int client_id = 0;
  Batch train;
  Batch test;
};

enum class Provenance { Synthetic, Partitioned, Ingested };
std::string to_string(Provenance p);

struct FederatedDataset {
  std::vector<ClientShard> shards;
  std::size_t num_classes = 0;
  std::size_t input_dim = 0;
  Provenance provenance = Provenance::Synthetic;

  std::size_t num_clients() const noexcept { return shards.size(); }
  std::size_t total_train() const;
};

// Unpartitioned labeled examples.
struct LabeledPool {
  Matrix features;
  std::vector<int> labels;
};

// Shard sizes ~ clamp(round(scale * (1 + X)), lo, hi) with X ~ Lomax(shape).
struct PowerLawOptions {
  double shape = 1.5;
  double scale = 50.0;
  std::size_t lo = 10;
  std::size_t hi = 1000;
};
std::vector<std::size_t> power_law_sizes(std::size_t n, RngStream& rng,
                                         const PowerLawOptions& opts = {});

// Split of one client's examples: 10% test (at least one), the rest train.
std::size_t test_count_for(std::size_t total);

struct SyntheticOptions {
  std::size_t input_dim = 60;
  std::size_t num_classes = 10;
  PowerLawOptions sizes{};
};

// Synthetic(alpha, beta): per-client softmax teacher models whose means and
// feature offsets are drawn with variances alpha and beta.
FederatedDataset generate_synthetic(double alpha, double beta, std::size_t n_clients,
                                    RngStream& rng, const SyntheticOptions& opts = {});

// 8x8 handwritten-digit stand-in: 10 glyph templates with random shifts,
// stroke gain and pixel noise; features in [0, 1].
LabeledPool generate_digits(std::size_t samples_per_class, RngStream& rng);

struct PartitionOptions {
  PowerLawOptions sizes{};
};

// Label-limited non-IID split. Client k draws classes_per_client consecutive
// classes of a shuffled class order starting at offset k; shard sizes follow
// the power law, scaled so the most demanded class is exactly consumed.
FederatedDataset partition_noniid(const Matrix& features, const std::vector<int>& labels,
                                  std::size_t n_clients, std::size_t classes_per_client,
                                  RngStream& rng, const PartitionOptions& opts = {});

// Relabels client k with a rotation by (k mod populations) * (C / populations),
// producing planted populations with conflicting objectives.
void plant_populations(FederatedDataset& data, std::size_t populations);
int population_of(int client_id, std::size_t populations);

class IdxError : public Error {
 public:
  enum class Kind { Io, MagicMismatch, Truncated, CountMismatch };
  IdxError(Kind kind, const std::string& what);
  Kind idx_kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

// Reads an IDX image file (magic 0x00000803) and label file (0x00000801).
// Pixels are scaled by 1/255.
LabeledPool load_idx(const std::filesystem::path& images_path,
                     const std::filesystem::path& labels_path);

// JSON-lines cache: a header line with dataset metadata, then one shard per line
// {"id", "train_x", "train_y", "test_x", "test_y"}.
void write_dataset_jsonl(const FederatedDataset& data, const std::filesystem::path& path);
FederatedDataset read_dataset_jsonl(const std::filesystem::path& path);

// Mean pairwise total-variation distance between client label histograms.
double mean_label_tv_distance(const FederatedDataset& data);

}  // namespace fglab
