// Serial reference kernels vs their OpenMP counterparts.
#include <chrono>
#include <cstdio>
#include <functional>

#include "fglab/clustering.hpp"
#include "fglab/datagen.hpp"
#include "fglab/flcore.hpp"
#include "fglab/parallel.hpp"
#include "fglab/reference.hpp"

using namespace fglab;

namespace {

double best_of(int reps, const std::function<void()>& f) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

void report(const char* name, double serial, double parallel) {
  std::printf("%-22s serial %9.4f s  openmp %9.4f s  speedup %5.2fx\n", name, serial, parallel, serial / parallel);
}

}  // namespace

int main() {
  configure_threads_from_env();
  std::printf("threads: %d\n", thread_count());

  RngStream rng(7, 1);
  Matrix updates(200, 650);
  for (double& v : updates.data()) v = rng.normal();

  report("pairwise_euclidean", best_of(3, [&] { serial::pairwise_euclidean(updates); }),
         best_of(3, [&] { pairwise_euclidean(updates); }));
  const Matrix sim = similarity_matrix(updates);
  report("similarity_matrix", best_of(3, [&] { serial::similarity_matrix(updates); }),
         best_of(3, [&] { similarity_matrix(updates); }));
  report("madc_matrix", best_of(3, [&] { serial::madc_matrix(sim); }), best_of(3, [&] { madc_matrix(sim); }));

  RngStream drng(7, 2);
  const LabeledPool pool = generate_digits(300, drng);
  const FederatedDataset data = partition_noniid(pool.features, pool.labels, 100, 2, drng);
  const ModelSpec spec{ModelKind::MCLR, data.input_dim, data.num_classes, 0};
  const ParamVector w = initial_model(spec, 1);
  std::vector<int> selected;
  for (int i = 0; i < 20; ++i) selected.push_back(i * 5);
  const TrainParams train{};
  report("fedavg_round", best_of(3, [&] { serial::fedavg_round(w, data, selected, spec, train, 1, 1); }),
         best_of(3, [&] { fedavg_round(w, data, selected, spec, train, 1, 1); }));
  return 0;
}
