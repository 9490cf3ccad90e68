#include "trainer/mlp.hpp"

#include <algorithm>
#include <cmath>

#include "common/error.hpp"
#include "common/random.hpp"

namespace diffdetect::trainer {

void MlpConfig::validate() const {
  if (input_dim == 0) fail(ErrorCode::kInvalidArgument, "input_dim must be positive");
  for (auto h : hidden_dims) {
    if (h == 0) fail(ErrorCode::kInvalidArgument, "hidden layer widths must be positive");
  }
  if (!(lr_end > 0.0) || !(lr_start >= lr_end)) {
    fail(ErrorCode::kInvalidArgument, "learning rates must satisfy lr_start >= lr_end > 0");
  }
  if (max_epochs < 1) fail(ErrorCode::kInvalidArgument, "max_epochs must be >= 1");
  if (batch_size == 0) fail(ErrorCode::kInvalidArgument, "batch_size must be positive");
  if (early_stop_patience < 1) {
    fail(ErrorCode::kInvalidArgument, "early_stop_patience must be >= 1");
  }
}

std::uint64_t param_count(const MlpConfig& config) {
  std::uint64_t total = 0;
  std::uint64_t fan_in = config.input_dim;
  for (auto h : config.hidden_dims) {
    total += (fan_in + 1) * h;
    fan_in = h;
  }
  return total + (fan_in + 1);
}

MlpModel init_model(const MlpConfig& config) {
  config.validate();
  MlpModel model;
  model.config = config;
  rng::Engine gen(config.seed);
  std::vector<std::size_t> widths = config.hidden_dims;
  widths.push_back(1);
  std::size_t fan_in = config.input_dim;
  for (auto fan_out : widths) {
    Layer<float> layer;
    layer.weight.resize(static_cast<Eigen::Index>(fan_out), static_cast<Eigen::Index>(fan_in));
    layer.bias = Vector<float>::Zero(static_cast<Eigen::Index>(fan_out));
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    float* w = layer.weight.data();
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) {
      w[i] = static_cast<float>(rng::uniform(gen, -bound, bound));
    }
    model.layers.push_back(std::move(layer));
    fan_in = fan_out;
  }
  return model;
}

template <typename Scalar>
Scalar sigmoid(Scalar z) {
  if (z >= 0) {
    return Scalar(1) / (Scalar(1) + std::exp(-z));
  }
  const Scalar e = std::exp(z);
  return e / (Scalar(1) + e);
}

template <typename Scalar>
Vector<Scalar> forward_logits(const Layers<Scalar>& layers, const Matrix<Scalar>& batch) {
  Matrix<Scalar> h = batch;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    Matrix<Scalar> z = h * layers[k].weight.transpose();
    z.rowwise() += layers[k].bias.transpose();
    if (k + 1 < layers.size()) {
      h = z.cwiseMax(Scalar(0));
    } else {
      h = std::move(z);
    }
  }
  return h.col(0);
}

namespace {

void check_input(const MlpModel& model, const Matrix<float>& batch) {
  if (model.layers.empty() ||
      batch.cols() != model.layers.front().weight.cols()) {
    fail(ErrorCode::kDimensionMismatch,
         "batch has " + std::to_string(batch.cols()) + " columns, model expects " +
             std::to_string(model.layers.empty() ? 0 : model.layers.front().weight.cols()));
  }
}

}  // namespace

Vector<float> forward(const MlpModel& model, const Matrix<float>& batch) {
  check_input(model, batch);
  Vector<float> logits = forward_logits(model.layers, batch);
  for (Eigen::Index i = 0; i < logits.size(); ++i) logits[i] = sigmoid(logits[i]);
  return logits;
}

template <typename Scalar>
Scalar bce_from_logits(const Vector<Scalar>& logits, std::span<const float> labels) {
  Scalar sum = 0;
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    const Scalar z = logits[i];
    const Scalar y = labels[static_cast<std::size_t>(i)];
    sum += std::max(z, Scalar(0)) - z * y + std::log1p(std::exp(-std::abs(z)));
  }
  return sum / static_cast<Scalar>(logits.size());
}

double bce_loss(std::span<const double> probabilities, std::span<const float> labels) {
  if (probabilities.size() != labels.size() || probabilities.empty()) {
    fail(ErrorCode::kDimensionMismatch, "bce_loss: length mismatch or empty input");
  }
  constexpr double kEps = 1e-12;
  double sum = 0.0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    const double p = std::clamp(probabilities[i], kEps, 1.0 - kEps);
    const double y = labels[i];
    sum -= y * std::log(p) + (1.0 - y) * std::log1p(-p);
  }
  return sum / static_cast<double>(probabilities.size());
}

template <typename Scalar>
Gradients<Scalar> backward(const Layers<Scalar>& layers, const Matrix<Scalar>& batch,
                           std::span<const float> labels) {
  if (static_cast<std::size_t>(batch.rows()) != labels.size()) {
    fail(ErrorCode::kDimensionMismatch, "backward: label count does not match batch rows");
  }
  const auto n_layers = layers.size();
  // activations[k] is the input of layer k; pre[k] its pre-activation.
  std::vector<Matrix<Scalar>> activations;
  std::vector<Matrix<Scalar>> pre;
  activations.reserve(n_layers);
  pre.reserve(n_layers);
  activations.push_back(batch);
  for (std::size_t k = 0; k < n_layers; ++k) {
    Matrix<Scalar> z = activations.back() * layers[k].weight.transpose();
    z.rowwise() += layers[k].bias.transpose();
    pre.push_back(z);
    if (k + 1 < n_layers) activations.push_back(z.cwiseMax(Scalar(0)));
  }

  const Vector<Scalar> logits = pre.back().col(0);
  Gradients<Scalar> g;
  g.loss = bce_from_logits<Scalar>(logits, labels);
  g.layers.resize(n_layers);

  const auto batch_rows = static_cast<Scalar>(batch.rows());
  Matrix<Scalar> delta(batch.rows(), 1);
  for (Eigen::Index i = 0; i < batch.rows(); ++i) {
    delta(i, 0) = (sigmoid(logits[i]) - static_cast<Scalar>(labels[static_cast<std::size_t>(i)])) /
                  batch_rows;
  }
  for (std::size_t k = n_layers; k-- > 0;) {
    g.layers[k].weight = delta.transpose() * activations[k];
    g.layers[k].bias = delta.colwise().sum().transpose();
    if (k > 0) {
      Matrix<Scalar> back = delta * layers[k].weight;
      const auto& z = pre[k - 1];
      for (Eigen::Index i = 0; i < back.size(); ++i) {
        if (!(z.data()[i] > Scalar(0))) back.data()[i] = Scalar(0);
      }
      delta = std::move(back);
    }
  }
  return g;
}

Gradients<float> backward(const MlpModel& model, const Matrix<float>& batch,
                          std::span<const float> labels) {
  check_input(model, batch);
  return backward<float>(model.layers, batch, labels);
}

void sgd_step(MlpModel& model, const Gradients<float>& gradients, double lr) {
  if (gradients.layers.size() != model.layers.size()) {
    fail(ErrorCode::kDimensionMismatch, "sgd_step: gradient layer count mismatch");
  }
  const auto step = static_cast<float>(lr);
  for (std::size_t k = 0; k < model.layers.size(); ++k) {
    auto& layer = model.layers[k];
    const auto& grad = gradients.layers[k];
    if (grad.weight.rows() != layer.weight.rows() || grad.weight.cols() != layer.weight.cols() ||
        grad.bias.size() != layer.bias.size()) {
      fail(ErrorCode::kDimensionMismatch, "sgd_step: gradient shape mismatch");
    }
    layer.weight -= step * grad.weight;
    layer.bias -= step * grad.bias;
  }
}

double schedule_value(double fraction, double lr_start, double lr_end) {
  if (fraction <= 0.0) return lr_start;
  if (fraction >= 1.0) return lr_end;
  return lr_start * std::pow(lr_end / lr_start, fraction);
}

double lr_at(int epoch, const MlpConfig& config) {
  if (epoch < 0 || epoch >= config.max_epochs) {
    fail(ErrorCode::kInvalidArgument, "epoch " + std::to_string(epoch) + " outside [0, " +
                                          std::to_string(config.max_epochs) + ")");
  }
  if (config.max_epochs == 1) return config.lr_start;
  return schedule_value(static_cast<double>(epoch) / (config.max_epochs - 1), config.lr_start,
                        config.lr_end);
}

template float sigmoid<float>(float);
template double sigmoid<double>(double);
template Vector<float> forward_logits<float>(const Layers<float>&, const Matrix<float>&);
template Vector<double> forward_logits<double>(const Layers<double>&, const Matrix<double>&);
template float bce_from_logits<float>(const Vector<float>&, std::span<const float>);
template double bce_from_logits<double>(const Vector<double>&, std::span<const float>);
template Gradients<float> backward<float>(const Layers<float>&, const Matrix<float>&,
                                          std::span<const float>);
template Gradients<double> backward<double>(const Layers<double>&, const Matrix<double>&,
                                            std::span<const float>);

}  // namespace diffdetect::trainer
