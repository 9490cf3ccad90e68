#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <vector>

#include "embedding/store.hpp"

namespace diffdetect::trainer {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

struct MlpConfig {
  std::size_t input_dim = 512;
  std::vector<std::size_t> hidden_dims = {4096, 4096, 1024};
  double lr_start = 0.1;
  double lr_end = 0.001;
  int max_epochs = 270;
  std::size_t batch_size = 256;
  std::uint64_t seed = 0;
  // Epochs without a validation-AUC improvement before stopping.
  int early_stop_patience = 20;
  // Unit-normalise each embedding part before fusion.
  bool l2_normalize = false;
  embedding::FeatureMode feature_mode = embedding::FeatureMode::kImageOnly;

  void validate() const;
  bool operator==(const MlpConfig&) const = default;
};

// Weight is fan_out x fan_in (row-major), bias is fan_out.
template <typename Scalar>
struct Layer {
  Matrix<Scalar> weight;
  Vector<Scalar> bias;
};

template <typename Scalar>
using Layers = std::vector<Layer<Scalar>>;

struct MlpModel {
  MlpConfig config;
  Layers<float> layers;
};

// Sum over layers of (fan_in + 1) * fan_out, output layer included.
std::uint64_t param_count(const MlpConfig& config);

// U(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases, deterministic per seed.
MlpModel init_model(const MlpConfig& config);

// Pre-sigmoid outputs, one per batch row. ReLU between hidden layers.
template <typename Scalar>
Vector<Scalar> forward_logits(const Layers<Scalar>& layers, const Matrix<Scalar>& batch);

// Sigmoid of forward_logits. Throws Error(kDimensionMismatch) on a column
// count different from input_dim.
Vector<float> forward(const MlpModel& model, const Matrix<float>& batch);

template <typename Scalar>
Scalar sigmoid(Scalar z);

// Mean binary cross-entropy of logits against {0,1} labels, evaluated as
// max(z,0) - z*y + log1p(exp(-|z|)).
template <typename Scalar>
Scalar bce_from_logits(const Vector<Scalar>& logits, std::span<const float> labels);

// Mean binary cross-entropy of probabilities, clamped away from 0 and 1.
double bce_loss(std::span<const double> probabilities, std::span<const float> labels);

template <typename Scalar>
struct Gradients {
  Layers<Scalar> layers;
  Scalar loss = 0;
};

// Exact gradients of bce_from_logits(forward_logits(batch)) w.r.t. every parameter.
template <typename Scalar>
Gradients<Scalar> backward(const Layers<Scalar>& layers, const Matrix<Scalar>& batch,
                           std::span<const float> labels);

Gradients<float> backward(const MlpModel& model, const Matrix<float>& batch,
                          std::span<const float> labels);

// theta <- theta - lr * grad
void sgd_step(MlpModel& model, const Gradients<float>& gradients, double lr);

// Geometric decay lr_start * (lr_end/lr_start)^(epoch/(max_epochs-1)).
// Endpoints are returned exactly.
double lr_at(int epoch, const MlpConfig& config);
double schedule_value(double fraction, double lr_start, double lr_end);

template <typename To, typename From>
Layers<To> cast_layers(const Layers<From>& layers) {
  Layers<To> out;
  out.reserve(layers.size());
  for (const auto& l : layers) {
    out.push_back({l.weight.template cast<To>(), l.bias.template cast<To>()});
  }
  return out;
}

}  // namespace diffdetect::trainer
