#include "fglab/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fglab/error.hpp"

namespace fglab {

std::string to_string(ModelKind kind) { return kind == ModelKind::MCLR ? "mclr" : "mlp"; }

ModelKind parse_model_kind(const std::string& name) {
  if (name == "mclr") return ModelKind::MCLR;
  if (name == "mlp") return ModelKind::MLP;
  throw ConfigError("unknown model '" + name + "'");
}

std::size_t parameter_count(const ModelSpec& s) {
  if (s.kind == ModelKind::MCLR) return s.num_classes * s.input_dim + s.num_classes;
  if (s.hidden_units == 0) throw InvalidArgument("MLP needs hidden_units > 0");
  return s.hidden_units * s.input_dim + s.hidden_units + s.num_classes * s.hidden_units +
         s.num_classes;
}

namespace {

void check_spec(const ModelSpec& s) {
  if (s.input_dim == 0 || s.num_classes == 0)
    throw InvalidArgument("model spec needs positive input_dim and num_classes");
  if (s.kind == ModelKind::MLP && s.hidden_units == 0)
    throw InvalidArgument("MLP needs hidden_units > 0");
}

void check_batch(const ModelSpec& s, std::span<const double> w, const Batch& b) {
  require_same_dim(w.size(), parameter_count(s), "model parameters");
  if (b.features.rows() != b.labels.size())
    throw DimensionMismatch("batch: feature rows and label count differ");
  if (b.size() > 0) require_same_dim(b.features.cols(), s.input_dim, "batch features");
  for (int y : b.labels)
    if (y < 0 || static_cast<std::size_t>(y) >= s.num_classes)
      throw InvalidArgument("batch: label out of range");
}

// out = W x + bias, W is rows x cols stored at `w`.
void affine(const double* w, const double* bias, std::span<const double> x, std::size_t rows,
            double* out) {
  const std::size_t cols = x.size();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* wr = w + r * cols;
    double s = bias[r];
    for (std::size_t c = 0; c < cols; ++c) s += wr[c] * x[c];
    out[r] = s;
  }
}

// In-place softmax; returns log-sum-exp of the input logits.
double softmax_inplace(std::span<double> z) {
  const double mx = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double& v : z) {
    v = std::exp(v - mx);
    s += v;
  }
  for (double& v : z) v /= s;
  return mx + std::log(s);
}

std::size_t argmax_lowest(std::span<const double> z) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < z.size(); ++i)
    if (z[i] > z[best]) best = i;
  return best;
}

// Forward pass for one example: fills logits (and hidden pre-activations for MLP).
void forward(const ModelSpec& s, std::span<const double> w, std::span<const double> x,
             std::vector<double>& hidden, std::vector<double>& logits) {
  const std::size_t C = s.num_classes;
  const std::size_t D = s.input_dim;
  logits.resize(C);
  if (s.kind == ModelKind::MCLR) {
    affine(w.data(), w.data() + C * D, x, C, logits.data());
    return;
  }
  const std::size_t H = s.hidden_units;
  hidden.resize(H);
  const double* w1 = w.data();
  const double* b1 = w1 + H * D;
  const double* w2 = b1 + H;
  const double* b2 = w2 + C * H;
  affine(w1, b1, x, H, hidden.data());
  std::vector<double> act(H);
  for (std::size_t h = 0; h < H; ++h) act[h] = hidden[h] > 0.0 ? hidden[h] : 0.0;
  affine(w2, b2, act, C, logits.data());
}

}  // namespace

std::vector<LayerWeights> unflatten(const ModelSpec& spec, const ParamVector& flat) {
  check_spec(spec);
  require_same_dim(flat.size(), parameter_count(spec), "unflatten");
  std::vector<std::pair<std::size_t, std::size_t>> shapes;
  if (spec.kind == ModelKind::MCLR) {
    shapes = {{spec.num_classes, spec.input_dim}};
  } else {
    shapes = {{spec.hidden_units, spec.input_dim}, {spec.num_classes, spec.hidden_units}};
  }
  std::vector<LayerWeights> layers;
  auto it = flat.begin();
  for (auto [out, in] : shapes) {
    LayerWeights l{Matrix(out, in), std::vector<double>(out)};
    std::copy(it, it + static_cast<std::ptrdiff_t>(out * in), l.weights.data().begin());
    it += static_cast<std::ptrdiff_t>(out * in);
    std::copy(it, it + static_cast<std::ptrdiff_t>(out), l.bias.begin());
    it += static_cast<std::ptrdiff_t>(out);
    layers.push_back(std::move(l));
  }
  return layers;
}

ParamVector flatten(const ModelSpec& spec, const std::vector<LayerWeights>& layers) {
  ParamVector flat;
  flat.reserve(parameter_count(spec));
  for (const auto& l : layers) {
    flat.insert(flat.end(), l.weights.data().begin(), l.weights.data().end());
    flat.insert(flat.end(), l.bias.begin(), l.bias.end());
  }
  require_same_dim(flat.size(), parameter_count(spec), "flatten");
  return flat;
}

ParamVector init_params(const ModelSpec& spec, RngStream& rng) {
  check_spec(spec);
  ParamVector flat(parameter_count(spec), 0.0);
  if (spec.kind == ModelKind::MCLR) return flat;
  const std::size_t H = spec.hidden_units, D = spec.input_dim, C = spec.num_classes;
  const double s1 = std::sqrt(6.0 / static_cast<double>(D + H));
  const double s2 = std::sqrt(6.0 / static_cast<double>(H + C));
  std::size_t pos = 0;
  for (std::size_t i = 0; i < H * D; ++i) flat[pos++] = rng.uniform(-s1, s1);
  pos += H;
  for (std::size_t i = 0; i < C * H; ++i) flat[pos++] = rng.uniform(-s2, s2);
  return flat;
}

double loss(const ModelSpec& spec, std::span<const double> w, const Batch& b) {
  check_spec(spec);
  check_batch(spec, w, b);
  if (b.size() == 0) throw InvalidArgument("loss: empty batch");
  std::vector<double> hidden, logits;
  double total = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    forward(spec, w, b.features.row(i), hidden, logits);
    const double z_y = logits[static_cast<std::size_t>(b.labels[i])];
    total += softmax_inplace(logits) - z_y;
  }
  return total / static_cast<double>(b.size());
}

double loss_and_gradient(const ModelSpec& spec, std::span<const double> w, const Batch& b,
                         ParamVector& grad) {
  check_spec(spec);
  check_batch(spec, w, b);
  if (b.size() == 0) throw InvalidArgument("gradient: empty batch");
  grad.assign(w.size(), 0.0);
  const std::size_t C = spec.num_classes;
  const std::size_t D = spec.input_dim;
  std::vector<double> hidden, logits, act, dh;
  double total = 0.0;

  for (std::size_t i = 0; i < b.size(); ++i) {
    const auto x = b.features.row(i);
    const auto y = static_cast<std::size_t>(b.labels[i]);
    forward(spec, w, x, hidden, logits);
    const double z_y = logits[y];
    total += softmax_inplace(logits) - z_y;
    logits[y] -= 1.0;  // dL/dz = p - onehot

    if (spec.kind == ModelKind::MCLR) {
      double* gw = grad.data();
      double* gb = gw + C * D;
      for (std::size_t c = 0; c < C; ++c) {
        const double g = logits[c];
        if (g == 0.0) continue;
        double* row = gw + c * D;
        for (std::size_t j = 0; j < D; ++j) row[j] += g * x[j];
        gb[c] += g;
      }
      continue;
    }

    const std::size_t H = spec.hidden_units;
    const double* w2 = w.data() + H * D + H;
    double* gw1 = grad.data();
    double* gb1 = gw1 + H * D;
    double* gw2 = gb1 + H;
    double* gb2 = gw2 + C * H;
    act.resize(H);
    dh.assign(H, 0.0);
    for (std::size_t h = 0; h < H; ++h) act[h] = hidden[h] > 0.0 ? hidden[h] : 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      const double g = logits[c];
      const double* w2r = w2 + c * H;
      double* gw2r = gw2 + c * H;
      for (std::size_t h = 0; h < H; ++h) {
        gw2r[h] += g * act[h];
        dh[h] += g * w2r[h];
      }
      gb2[c] += g;
    }
    for (std::size_t h = 0; h < H; ++h) {
      if (hidden[h] <= 0.0) continue;
      const double g = dh[h];
      double* row = gw1 + h * D;
      for (std::size_t j = 0; j < D; ++j) row[j] += g * x[j];
      gb1[h] += g;
    }
  }
  const double inv = 1.0 / static_cast<double>(b.size());
  for (double& g : grad) g *= inv;
  return total * inv;
}

std::size_t count_correct(const ModelSpec& spec, std::span<const double> w, const Batch& b) {
  check_spec(spec);
  check_batch(spec, w, b);
  std::vector<double> hidden, logits;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    forward(spec, w, b.features.row(i), hidden, logits);
    if (argmax_lowest(logits) == static_cast<std::size_t>(b.labels[i])) ++hits;
  }
  return hits;
}

std::vector<int> predict(const ModelSpec& spec, std::span<const double> w, const Matrix& features) {
  check_spec(spec);
  require_same_dim(w.size(), parameter_count(spec), "model parameters");
  std::vector<double> hidden, logits;
  std::vector<int> out(features.rows());
  for (std::size_t i = 0; i < features.rows(); ++i) {
    forward(spec, w, features.row(i), hidden, logits);
    out[i] = static_cast<int>(argmax_lowest(logits));
  }
  return out;
}

double loss(const ModelParams& p, const Batch& b) { return loss(p.spec, p.flat, b); }

ParamVector gradient(const ModelParams& p, const Batch& b) {
  ParamVector g;
  loss_and_gradient(p.spec, p.flat, b, g);
  return g;
}

ParamVector prox_gradient(const ModelParams& p, const Batch& b, const ParamVector& anchor,
                          double mu) {
  if (mu < 0.0) throw InvalidArgument("prox_gradient: mu must be nonnegative");
  require_same_dim(anchor.size(), p.flat.size(), "prox_gradient anchor");
  ParamVector g = gradient(p, b);
  if (mu == 0.0) return g;
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += mu * (p.flat[i] - anchor[i]);
  return g;
}

double accuracy(const ModelParams& p, const Batch& test) {
  if (test.size() == 0) throw InvalidArgument("accuracy: empty test set");
  return static_cast<double>(count_correct(p.spec, p.flat, test)) /
         static_cast<double>(test.size());
}

}  // namespace fglab
