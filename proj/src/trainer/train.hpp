#pragma once

#include <functional>
#include <string>
#include <vector>

#include "corpus/manifest.hpp"
#include "embedding/store.hpp"
#include "trainer/mlp.hpp"

namespace diffdetect::trainer {

struct FeatureMatrix {
  Matrix<float> x;
  std::vector<float> labels;           // 1 = generated
  std::vector<std::size_t> records;    // positions in the source manifest
};

// Rows for every manifest record accepted by `keep`, in manifest order.
// ImageText mode fuses [image | text]; degenerate (empty-caption) records are
// skipped in that mode unless include_degenerate is set. Throws
// Error(kValidation) when a record has no embedding in the store and
// Error(kInvalidArgument) when the mode needs text the store lacks.
FeatureMatrix assemble_features(const embedding::EmbeddingStore& store,
                                const corpus::Manifest& manifest,
                                const corpus::RecordPredicate& keep,
                                embedding::FeatureMode mode, bool l2_normalize,
                                bool include_degenerate = false);

std::size_t feature_dim(const embedding::EmbeddingStore& store, embedding::FeatureMode mode);

struct EpochRecord {
  int epoch = 0;
  double lr = 0;
  double train_loss = 0;
  double val_accuracy = 0;
  double val_auc = 0;
  double val_loss = 0;  // tie-break for equal AUC; not part of the CSV
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;

  // "epoch,lr,train_loss,val_acc,val_auc" with one row per epoch.
  std::string to_csv() const;
};

struct TrainOptions {
  bool include_degenerate = false;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  MlpModel model;  // parameters of the best validation-AUC epoch
  TrainHistory history;
};

// Trains on the Train split of `manifest` and selects on its Val split.
// config.input_dim is overwritten with the feature width implied by the
// store and config.feature_mode. Deterministic for identical inputs.
TrainResult train(const embedding::EmbeddingStore& store, const corpus::Manifest& manifest,
                  MlpConfig config, const TrainOptions& options = {});

// Sigmoid outputs for a feature matrix, evaluated in chunks.
std::vector<double> predict(const MlpModel& model, const Matrix<float>& x);

struct GradCheckResult {
  double max_relative_error = 0;
  std::size_t parameters_checked = 0;
  int models = 0;
};

// Central finite differences against backward<double> on one model.
GradCheckResult gradient_check(const Layers<double>& layers, const Matrix<double>& batch,
                               std::span<const float> labels, double epsilon = 1e-4);

// `trials` random MLPs (widths <= 16, one or two hidden layers, batch <= 8).
// Draws whose ReLU inputs sit within 1e-3 of the kink are redrawn, since a
// finite difference straddling the kink measures a different function.
GradCheckResult random_gradient_check(int trials, std::uint64_t seed, double epsilon = 1e-4);

}  // namespace diffdetect::trainer
