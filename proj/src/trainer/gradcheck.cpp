#include <algorithm>
#include <cmath>
#include <limits>

#include "common/error.hpp"
#include "common/random.hpp"
#include "trainer/train.hpp"

namespace diffdetect::trainer {

namespace {

double loss_at(const Layers<double>& layers, const Matrix<double>& batch,
               std::span<const float> labels) {
  return bce_from_logits<double>(forward_logits<double>(layers, batch), labels);
}

// Smallest |pre-activation| over every hidden unit and batch row.
double kink_margin(const Layers<double>& layers, const Matrix<double>& batch) {
  double margin = std::numeric_limits<double>::infinity();
  Matrix<double> h = batch;
  for (std::size_t k = 0; k + 1 < layers.size(); ++k) {
    Matrix<double> z = h * layers[k].weight.transpose();
    z.rowwise() += layers[k].bias.transpose();
    margin = std::min(margin, z.cwiseAbs().minCoeff());
    h = z.cwiseMax(0.0);
  }
  return margin;
}

}  // namespace

GradCheckResult gradient_check(const Layers<double>& layers, const Matrix<double>& batch,
                               std::span<const float> labels, double epsilon) {
  const auto analytic = backward<double>(layers, batch, labels);
  Layers<double> probe = layers;
  GradCheckResult result;
  result.models = 1;

  auto check = [&](double& param, double grad) {
    const double saved = param;
    param = saved + epsilon;
    const double up = loss_at(probe, batch, labels);
    param = saved - epsilon;
    const double down = loss_at(probe, batch, labels);
    param = saved;
    const double numeric = (up - down) / (2.0 * epsilon);
    // Absolute floor: gradients below 1e-6 are compared absolutely.
    const double denom = std::max({std::abs(grad), std::abs(numeric), 1e-6});
    result.max_relative_error = std::max(result.max_relative_error, std::abs(grad - numeric) / denom);
    ++result.parameters_checked;
  };

  for (std::size_t k = 0; k < probe.size(); ++k) {
    auto& w = probe[k].weight;
    for (Eigen::Index i = 0; i < w.size(); ++i) check(w.data()[i], analytic.layers[k].weight.data()[i]);
    auto& b = probe[k].bias;
    for (Eigen::Index i = 0; i < b.size(); ++i) check(b[i], analytic.layers[k].bias[i]);
  }
  return result;
}

GradCheckResult random_gradient_check(int trials, std::uint64_t seed, double epsilon) {
  if (trials < 1) fail(ErrorCode::kInvalidArgument, "gradcheck needs at least one trial");
  constexpr double kMargin = 1e-3;
  rng::Engine gen(seed);
  GradCheckResult total;
  for (int t = 0; t < trials; ++t) {
    for (int attempt = 0;; ++attempt) {
      if (attempt > 1000) fail(ErrorCode::kValidation, "gradcheck: could not draw a kink-free model");
      MlpConfig config;
      config.input_dim = 1 + rng::below(gen, 16);
      config.hidden_dims.assign(1 + rng::below(gen, 2), 0);
      for (auto& h : config.hidden_dims) h = 1 + rng::below(gen, 16);
      config.seed = gen();
      MlpModel model = init_model(config);
      Layers<double> layers = cast_layers<double>(model.layers);
      // Non-zero biases exercise the bias gradients too.
      for (auto& l : layers) {
        for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias[i] = rng::uniform(gen, -0.5, 0.5);
      }
      const auto rows = static_cast<Eigen::Index>(1 + rng::below(gen, 8));
      Matrix<double> batch(rows, static_cast<Eigen::Index>(config.input_dim));
      for (Eigen::Index i = 0; i < batch.size(); ++i) batch.data()[i] = rng::uniform(gen, -1.0, 1.0);
      std::vector<float> labels(static_cast<std::size_t>(rows));
      for (auto& y : labels) y = static_cast<float>(rng::below(gen, 2));

      if (kink_margin(layers, batch) < kMargin) continue;
      const auto r = gradient_check(layers, batch, labels, epsilon);
      total.max_relative_error = std::max(total.max_relative_error, r.max_relative_error);
      total.parameters_checked += r.parameters_checked;
      ++total.models;
      break;
    }
  }
  return total;
}

}  // namespace diffdetect::trainer
