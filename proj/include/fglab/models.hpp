#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fglab/numkit.hpp"
#include "fglab/rng.hpp"

namespace fglab {

enum class ModelKind { MCLR, MLP };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& name);

struct ModelSpec {
  ModelKind kind = ModelKind::MCLR;
  std::size_t input_dim = 0;
  std::size_t num_classes = 0;
  std::size_t hidden_units = 0;  // 0 for MCLR

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

// MCLR: W (C x D) then b (C).
// MLP:  W1 (H x D), b1 (H), W2 (C x H), b2 (C).
std::size_t parameter_count(const ModelSpec& spec);

struct ModelParams {
  ModelSpec spec;
  ParamVector flat;
};

// Labeled examples: one row of `features` per label.
struct Batch {
  Matrix features;
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }
};

// Structured views used for inspection and construction in tests.
struct LayerWeights {
  Matrix weights;  // out x in
  std::vector<double> bias;
};
std::vector<LayerWeights> unflatten(const ModelSpec& spec, const ParamVector& flat);
ParamVector flatten(const ModelSpec& spec, const std::vector<LayerWeights>& layers);

// MCLR starts at zero; MLP draws uniform(-s, s), s = sqrt(6 / (fan_in + fan_out)),
// biases zero.
ParamVector init_params(const ModelSpec& spec, RngStream& rng);

// Mean softmax cross-entropy.
double loss(const ModelParams& p, const Batch& b);
ParamVector gradient(const ModelParams& p, const Batch& b);
// Gradient of loss + (mu/2)|w - anchor|^2.
ParamVector prox_gradient(const ModelParams& p, const Batch& b, const ParamVector& anchor, double mu);
// Fraction of argmax-correct predictions; ties resolve to the lowest class.
double accuracy(const ModelParams& p, const Batch& test);

// Lower-level entry points over a raw parameter span, used by the training loops.
double loss(const ModelSpec& spec, std::span<const double> w, const Batch& b);
// Writes the mean gradient into `grad` (resized) and returns the mean loss.
double loss_and_gradient(const ModelSpec& spec, std::span<const double> w, const Batch& b,
                         ParamVector& grad);
std::size_t count_correct(const ModelSpec& spec, std::span<const double> w, const Batch& b);
std::vector<int> predict(const ModelSpec& spec, std::span<const double> w, const Matrix& features);

}  // namespace fglab
