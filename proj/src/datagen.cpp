#include "fglab/datagen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

namespace fglab {

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::Synthetic: return "synthetic";
    case Provenance::Partitioned: return "partitioned";
    case Provenance::Ingested: return "ingested";
  }
  return "unknown";
}

std::size_t FederatedDataset::total_train() const {
  std::size_t n = 0;
  for (const auto& s : shards) n += s.train.size();
  return n;
}

std::vector<std::size_t> power_law_sizes(std::size_t n, RngStream& rng, const PowerLawOptions& o) {
  if (o.shape <= 0.0 || o.scale <= 0.0 || o.lo == 0 || o.lo > o.hi)
    throw InvalidArgument("power_law_sizes: bad options");
  std::vector<std::size_t> sizes(n);
  for (auto& s : sizes) {
    double u = rng.uniform();
    while (u <= 0.0) u = rng.uniform();
    const double lomax = std::pow(u, -1.0 / o.shape) - 1.0;
    const double raw = std::round(o.scale * (1.0 + lomax));
    s = static_cast<std::size_t>(std::clamp(raw, static_cast<double>(o.lo), static_cast<double>(o.hi)));
  }
  return sizes;
}

std::size_t test_count_for(std::size_t total) {
  if (total < 2) throw InvalidArgument("client shard needs at least two examples");
  const auto t = static_cast<std::size_t>(std::round(0.1 * static_cast<double>(total)));
  return std::clamp<std::size_t>(t, 1, total - 1);
}

namespace {

Batch gather(const Matrix& features, const std::vector<int>& labels,
             std::span<const std::size_t> idx) {
  Batch b{Matrix(idx.size(), features.cols()), std::vector<int>(idx.size())};
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto src = features.row(idx[i]);
    std::copy(src.begin(), src.end(), b.features.row(i).begin());
    b.labels[i] = labels[idx[i]];
  }
  return b;
}

ClientShard split_shard(int id, const Matrix& features, const std::vector<int>& labels,
                        std::span<const std::size_t> idx) {
  const std::size_t n_test = test_count_for(idx.size());
  const std::size_t n_train = idx.size() - n_test;
  return ClientShard{id, gather(features, labels, idx.subspan(0, n_train)),
                     gather(features, labels, idx.subspan(n_train))};
}

}  // namespace

FederatedDataset generate_synthetic(double alpha, double beta, std::size_t n_clients,
                                    RngStream& rng, const SyntheticOptions& o) {
  if (alpha < 0.0 || beta < 0.0) throw InvalidArgument("generate_synthetic: negative variance");
  if (n_clients == 0) throw InvalidArgument("generate_synthetic: need at least one client");
  const std::size_t D = o.input_dim, C = o.num_classes;

  std::vector<double> cov_sd(D);
  for (std::size_t j = 0; j < D; ++j) cov_sd[j] = std::sqrt(std::pow(static_cast<double>(j + 1), -1.2));

  const auto sizes = power_law_sizes(n_clients, rng, o.sizes);
  FederatedDataset data;
  data.num_classes = C;
  data.input_dim = D;
  data.provenance = Provenance::Synthetic;

  for (std::size_t k = 0; k < n_clients; ++k) {
    const double u_k = rng.normal(0.0, std::sqrt(alpha));
    const double b_k = rng.normal(0.0, std::sqrt(beta));
    Matrix W(C, D);
    std::vector<double> bias(C), mean(D);
    for (double& w : W.data()) w = rng.normal(u_k, 1.0);
    for (double& b : bias) b = rng.normal(u_k, 1.0);
    for (double& v : mean) v = rng.normal(b_k, 1.0);

    const std::size_t n = sizes[k];
    Matrix X(n, D);
    std::vector<int> y(n);
    std::vector<double> logits(C);
    for (std::size_t i = 0; i < n; ++i) {
      auto x = X.row(i);
      for (std::size_t j = 0; j < D; ++j) x[j] = rng.normal(mean[j], cov_sd[j]);
      for (std::size_t c = 0; c < C; ++c) logits[c] = bias[c] + dot(W.row(c), x);
      y[i] = static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
    }
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    data.shards.push_back(split_shard(static_cast<int>(k), X, y, idx));
  }
  return data;
}

namespace {

// Seven-segment style glyphs on an 8x8 canvas, one string per row.
constexpr std::array<std::array<const char*, 8>, 10> kGlyphs = {{
    {"..####..", ".#....#.", ".#....#.", ".#....#.", ".#....#.", ".#....#.", ".#....#.", "..####.."},
    {"...##...", "..###...", "...##...", "...##...", "...##...", "...##...", "...##...", "..####.."},
    {"..####..", ".#....#.", "......#.", ".....#..", "....#...", "...#....", "..#.....", ".######."},
    {"..####..", ".#....#.", "......#.", "...###..", "......#.", "......#.", ".#....#.", "..####.."},
    {".....#..", "....##..", "...#.#..", "..#..#..", ".######.", ".....#..", ".....#..", ".....#.."},
    {".######.", ".#......", ".#......", ".#####..", "......#.", "......#.", ".#....#.", "..####.."},
    {"..####..", ".#......", ".#......", ".#####..", ".#....#.", ".#....#.", ".#....#.", "..####.."},
    {".######.", "......#.", ".....#..", "....#...", "...#....", "...#....", "...#....", "...#...."},
    {"..####..", ".#....#.", ".#....#.", "..####..", ".#....#.", ".#....#.", ".#....#.", "..####.."},
    {"..####..", ".#....#.", ".#....#.", ".#....#.", "..#####.", "......#.", ".....#..", "..###..."},
}};

}  // namespace

LabeledPool generate_digits(std::size_t samples_per_class, RngStream& rng) {
  constexpr std::size_t kSide = 8;
  LabeledPool pool{Matrix(10 * samples_per_class, kSide * kSide),
                   std::vector<int>(10 * samples_per_class)};
  std::size_t row = 0;
  for (std::size_t s = 0; s < samples_per_class; ++s) {
    for (int digit = 0; digit < 10; ++digit, ++row) {
      // Occasional one-pixel jitter; most glyphs stay centred.
      const int dx = rng.uniform() < 0.2 ? (rng.uniform() < 0.5 ? -1 : 1) : 0;
      const int dy = rng.uniform() < 0.2 ? (rng.uniform() < 0.5 ? -1 : 1) : 0;
      const double gain = rng.uniform(0.5, 1.0);
      auto x = pool.features.row(row);
      for (std::size_t r = 0; r < kSide; ++r) {
        for (std::size_t c = 0; c < kSide; ++c) {
          const int sr = static_cast<int>(r) - dy;
          const int sc = static_cast<int>(c) - dx;
          double v = 0.0;
          if (sr >= 0 && sr < 8 && sc >= 0 && sc < 8 && kGlyphs[digit][sr][sc] == '#') v = gain;
          // Stroke dropout and background speckle.
          if (v > 0.0 && rng.uniform() < 0.15) v = 0.0;
          v += rng.normal(0.0, 0.2);
          x[r * kSide + c] = std::clamp(v, 0.0, 1.0);
        }
      }
      pool.labels[row] = digit;
    }
  }
  return pool;
}

FederatedDataset partition_noniid(const Matrix& features, const std::vector<int>& labels,
                                  std::size_t n_clients, std::size_t classes_per_client,
                                  RngStream& rng, const PartitionOptions& opts) {
  if (features.rows() != labels.size())
    throw DimensionMismatch("partition_noniid: feature rows and label count differ");
  if (n_clients == 0) throw InvalidArgument("partition_noniid: need at least one client");
  const int max_label = labels.empty() ? -1 : *std::max_element(labels.begin(), labels.end());
  const auto C = static_cast<std::size_t>(max_label + 1);
  if (classes_per_client < 1 || classes_per_client > C)
    throw InvalidArgument("partition_noniid: classes_per_client must lie in [1, num_classes]");

  std::vector<std::vector<std::size_t>> by_class(C);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0) throw InvalidArgument("partition_noniid: negative label");
    by_class[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  for (auto& v : by_class) rng.shuffle(std::span<std::size_t>(v));

  std::vector<int> class_order(C);
  std::iota(class_order.begin(), class_order.end(), 0);
  rng.shuffle(std::span<int>(class_order));

  std::vector<std::vector<int>> client_classes(n_clients);
  for (std::size_t k = 0; k < n_clients; ++k)
    for (std::size_t j = 0; j < classes_per_client; ++j)
      client_classes[k].push_back(class_order[(k + j) % C]);

  const auto raw = power_law_sizes(n_clients, rng, opts.sizes);

  // Demand per class under the raw sizes, split evenly over each client's classes.
  std::vector<double> demand(C, 0.0);
  for (std::size_t k = 0; k < n_clients; ++k)
    for (int c : client_classes[k])
      demand[static_cast<std::size_t>(c)] += static_cast<double>(raw[k]) / static_cast<double>(classes_per_client);
  double factor = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < C; ++c)
    if (demand[c] > 0.0) factor = std::min(factor, static_cast<double>(by_class[c].size()) / demand[c]);

  // Per-(client, class) slot counts: the floored shard size split evenly over
  // the client's classes, remainders going to its leading classes.
  std::vector<std::vector<std::size_t>> slots(n_clients);
  std::vector<std::size_t> totals(n_clients, 0);
  std::vector<std::size_t> used(C, 0);
  for (std::size_t k = 0; k < n_clients; ++k) {
    totals[k] = static_cast<std::size_t>(std::floor(static_cast<double>(raw[k]) * factor + 1e-9));
    for (std::size_t j = 0; j < classes_per_client; ++j) {
      const std::size_t take = totals[k] / classes_per_client + (j < totals[k] % classes_per_client ? 1 : 0);
      slots[k].push_back(take);
      used[static_cast<std::size_t>(client_classes[k][j])] += take;
    }
  }
  // Remainders can overdraw a class by a few examples; trim them from the
  // largest shards holding that class.
  for (std::size_t c = 0; c < C; ++c) {
    while (used[c] > by_class[c].size()) {
      std::size_t best_k = n_clients, best_j = 0;
      for (std::size_t k = 0; k < n_clients; ++k)
        for (std::size_t j = 0; j < classes_per_client; ++j)
          if (static_cast<std::size_t>(client_classes[k][j]) == c && slots[k][j] > 0 &&
              (best_k == n_clients || totals[k] > totals[best_k])) {
            best_k = k;
            best_j = j;
          }
      --slots[best_k][best_j];
      --totals[best_k];
      --used[c];
    }
  }
  for (std::size_t k = 0; k < n_clients; ++k)
    if (totals[k] < 2)
      throw InvalidArgument("partition_noniid: infeasible demand, pool too small for " +
                            std::to_string(n_clients) + " clients");

  FederatedDataset data;
  data.num_classes = C;
  data.input_dim = features.cols();
  data.provenance = Provenance::Partitioned;
  std::vector<std::size_t> cursor(C, 0);
  for (std::size_t k = 0; k < n_clients; ++k) {
    std::vector<std::size_t> idx;
    for (std::size_t j = 0; j < classes_per_client; ++j) {
      const auto c = static_cast<std::size_t>(client_classes[k][j]);
      for (std::size_t t = 0; t < slots[k][j]; ++t) idx.push_back(by_class[c][cursor[c]++]);
    }
    rng.shuffle(std::span<std::size_t>(idx));
    data.shards.push_back(split_shard(static_cast<int>(k), features, labels, idx));
  }
  return data;
}

int population_of(int client_id, std::size_t populations) {
  return populations <= 1 ? 0 : static_cast<int>(static_cast<std::size_t>(client_id) % populations);
}

void plant_populations(FederatedDataset& data, std::size_t populations) {
  if (populations <= 1) return;
  if (populations > data.num_classes) throw InvalidArgument("plant_populations: too many populations");
  const std::size_t shift = data.num_classes / populations;
  const auto C = static_cast<int>(data.num_classes);
  for (auto& shard : data.shards) {
    const int offset = population_of(shard.client_id, populations) * static_cast<int>(shift);
    for (auto* labels : {&shard.train.labels, &shard.test.labels})
      for (int& y : *labels) y = (y + offset) % C;
  }
}

IdxError::IdxError(Kind kind, const std::string& what)
    : Error(kind == Kind::Io              ? "idx_io"
            : kind == Kind::MagicMismatch ? "idx_magic_mismatch"
            : kind == Kind::Truncated     ? "idx_truncated"
                                          : "idx_count_mismatch",
            what),
      kind_(kind) {}

namespace {

std::vector<unsigned char> read_all(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IdxError(IdxError::Kind::Io, "cannot open " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t off) {
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) |
         (std::uint32_t{b[off + 2]} << 8) | std::uint32_t{b[off + 3]};
}

}  // namespace

LabeledPool load_idx(const std::filesystem::path& images_path,
                     const std::filesystem::path& labels_path) {
  const auto img = read_all(images_path);
  const auto lab = read_all(labels_path);

  if (img.size() < 16) throw IdxError(IdxError::Kind::Truncated, "image file header truncated");
  if (be32(img, 0) != 0x00000803u) throw IdxError(IdxError::Kind::MagicMismatch, "image file magic mismatch");
  if (lab.size() < 8) throw IdxError(IdxError::Kind::Truncated, "label file header truncated");
  if (be32(lab, 0) != 0x00000801u) throw IdxError(IdxError::Kind::MagicMismatch, "label file magic mismatch");

  const std::size_t count = be32(img, 4), rows = be32(img, 8), cols = be32(img, 12);
  const std::size_t n_labels = be32(lab, 4);
  if (img.size() < 16 + count * rows * cols) throw IdxError(IdxError::Kind::Truncated, "image data truncated");
  if (lab.size() < 8 + n_labels) throw IdxError(IdxError::Kind::Truncated, "label data truncated");
  if (count != n_labels)
    throw IdxError(IdxError::Kind::CountMismatch, "image count " + std::to_string(count) +
                                                      " != label count " + std::to_string(n_labels));

  LabeledPool pool{Matrix(count, rows * cols), std::vector<int>(count)};
  const unsigned char* px = img.data() + 16;
  for (double& v : pool.features.data()) v = static_cast<double>(*px++) / 255.0;
  for (std::size_t i = 0; i < count; ++i) pool.labels[i] = lab[8 + i];
  return pool;
}

namespace {

nlohmann::json batch_x(const Batch& b) {
  auto arr = nlohmann::json::array();
  for (std::size_t i = 0; i < b.size(); ++i) {
    const auto r = b.features.row(i);
    arr.push_back(std::vector<double>(r.begin(), r.end()));
  }
  return arr;
}

Batch batch_from(const nlohmann::json& xs, const nlohmann::json& ys, std::size_t dim) {
  Batch b{Matrix(xs.size(), dim), ys.get<std::vector<int>>()};
  if (b.labels.size() != xs.size()) throw DimensionMismatch("dataset cache: x/y length differ");
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const auto row = xs[i].get<std::vector<double>>();
    require_same_dim(row.size(), dim, "dataset cache row");
    std::copy(row.begin(), row.end(), b.features.row(i).begin());
  }
  return b;
}

}  // namespace

void write_dataset_jsonl(const FederatedDataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("io", "cannot write " + path.string());
  nlohmann::json header{{"num_clients", data.num_clients()},
                        {"num_classes", data.num_classes},
                        {"input_dim", data.input_dim},
                        {"provenance", to_string(data.provenance)}};
  out << header.dump() << '\n';
  for (const auto& s : data.shards) {
    nlohmann::json line{{"id", s.client_id},
                        {"train_x", batch_x(s.train)},
                        {"train_y", s.train.labels},
                        {"test_x", batch_x(s.test)},
                        {"test_y", s.test.labels}};
    out << line.dump() << '\n';
  }
}

FederatedDataset read_dataset_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error("dataset_cache", "empty dataset cache");
  const auto header = nlohmann::json::parse(line);
  FederatedDataset data;
  data.num_classes = header.at("num_classes").get<std::size_t>();
  data.input_dim = header.at("input_dim").get<std::size_t>();
  const auto prov = header.at("provenance").get<std::string>();
  data.provenance = prov == "synthetic"     ? Provenance::Synthetic
                    : prov == "partitioned" ? Provenance::Partitioned
                                            : Provenance::Ingested;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    data.shards.push_back(ClientShard{j.at("id").get<int>(),
                                      batch_from(j.at("train_x"), j.at("train_y"), data.input_dim),
                                      batch_from(j.at("test_x"), j.at("test_y"), data.input_dim)});
  }
  if (data.shards.size() != header.at("num_clients").get<std::size_t>())
    throw Error("dataset_cache", "shard count does not match header");
  for (std::size_t k = 0; k < data.shards.size(); ++k)
    if (data.shards[k].client_id != static_cast<int>(k))
      throw Error("dataset_cache", "client ids must be dense and ordered");
  return data;
}

double mean_label_tv_distance(const FederatedDataset& data) {
  const std::size_t n = data.num_clients();
  if (n < 2) return 0.0;
  std::vector<std::vector<double>> hist(n, std::vector<double>(data.num_classes, 0.0));
  for (std::size_t k = 0; k < n; ++k) {
    const auto& s = data.shards[k];
    const double total = static_cast<double>(s.train.size() + s.test.size());
    for (auto* labels : {&s.train.labels, &s.test.labels})
      for (int y : *labels) hist[k][static_cast<std::size_t>(y)] += 1.0 / total;
  }
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j, ++pairs) {
      double tv = 0.0;
      for (std::size_t c = 0; c < data.num_classes; ++c) tv += std::abs(hist[i][c] - hist[j][c]);
      sum += 0.5 * tv;
    }
  return sum / static_cast<double>(pairs);
}

}  // namespace fglab
