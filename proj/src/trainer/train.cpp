#include "trainer/train.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "common/error.hpp"
#include "common/random.hpp"
#include "embedding/backend.hpp"
#include "metrics/metrics.hpp"

namespace diffdetect::trainer {

std::size_t feature_dim(const embedding::EmbeddingStore& store, embedding::FeatureMode mode) {
  return mode == embedding::FeatureMode::kImageText ? store.image_dim + store.text_dim
                                                     : store.image_dim;
}

FeatureMatrix assemble_features(const embedding::EmbeddingStore& store,
                                const corpus::Manifest& manifest,
                                const corpus::RecordPredicate& keep,
                                embedding::FeatureMode mode, bool l2_normalize,
                                bool include_degenerate) {
  const bool with_text = mode == embedding::FeatureMode::kImageText;
  if (with_text && !store.has_text()) {
    fail(ErrorCode::kInvalidArgument, "image+text mode needs a store with text vectors");
  }
  const auto index = store.index();
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    const auto& rec = manifest.records[i];
    if (!keep(rec)) continue;
    if (with_text && rec.degenerate() && !include_degenerate) continue;
    if (!index.contains(rec.id)) {
      fail(ErrorCode::kValidation, "no embedding for sample \"" + rec.id + "\"");
    }
    rows.push_back(i);
  }

  const std::size_t dim = feature_dim(store, mode);
  FeatureMatrix fm;
  fm.x.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
  fm.labels.reserve(rows.size());
  fm.records = rows;
  std::vector<float> image;
  std::vector<float> text;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& rec = manifest.records[rows[r]];
    const auto& emb = store.records[index.at(rec.id)];
    image = emb.image_vec;
    if (l2_normalize) embedding::l2_normalize(image);
    float* row = fm.x.row(static_cast<Eigen::Index>(r)).data();
    std::copy(image.begin(), image.end(), row);
    if (with_text) {
      text = *emb.text_vec;
      if (l2_normalize) embedding::l2_normalize(text);
      std::copy(text.begin(), text.end(), row + image.size());
    }
    fm.labels.push_back(rec.label == corpus::Label::kGenerated ? 1.0f : 0.0f);
  }
  return fm;
}

std::string TrainHistory::to_csv() const {
  std::string out = "epoch,lr,train_loss,val_acc,val_auc\n";
  char line[160];
  for (const auto& e : epochs) {
    std::snprintf(line, sizeof line, "%d,%.9g,%.9g,%.9g,%.9g\n", e.epoch, e.lr, e.train_loss,
                  e.val_accuracy, e.val_auc);
    out += line;
  }
  return out;
}

std::vector<double> predict(const MlpModel& model, const Matrix<float>& x) {
  constexpr Eigen::Index kChunk = 1024;
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index start = 0; start < x.rows(); start += kChunk) {
    const Eigen::Index len = std::min(kChunk, x.rows() - start);
    const Matrix<float> chunk = x.middleRows(start, len);
    const Vector<float> p = forward(model, chunk);
    for (Eigen::Index i = 0; i < p.size(); ++i) out.push_back(p[i]);
  }
  return out;
}

namespace {

std::vector<int> as_int_labels(const std::vector<float>& labels) {
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = labels[i] > 0.5f ? 1 : 0;
  return out;
}

}  // namespace

TrainResult train(const embedding::EmbeddingStore& store, const corpus::Manifest& manifest,
                  MlpConfig config, const TrainOptions& options) {
  const auto mode = config.feature_mode;
  config.input_dim = feature_dim(store, mode);
  config.validate();

  const auto on_split = [](corpus::Split s) {
    return [s](const corpus::SampleRecord& r) { return r.split == s; };
  };
  const FeatureMatrix train_set = assemble_features(store, manifest, on_split(corpus::Split::kTrain),
                                                    mode, config.l2_normalize,
                                                    options.include_degenerate);
  const FeatureMatrix val_set = assemble_features(store, manifest, on_split(corpus::Split::kVal),
                                                  mode, config.l2_normalize,
                                                  options.include_degenerate);
  if (train_set.labels.empty()) fail(ErrorCode::kValidation, "empty train split");
  if (val_set.labels.empty()) fail(ErrorCode::kValidation, "empty val split");
  const std::vector<int> val_labels = as_int_labels(val_set.labels);

  TrainResult result;
  result.model = init_model(config);
  MlpModel& model = result.model;
  Layers<float> best_layers = model.layers;
  double best_auc = -1.0;
  double best_loss = std::numeric_limits<double>::infinity();

  // Shuffling draws from its own stream so the init stream stays untouched.
  rng::Engine shuffle_gen(config.seed ^ 0x9E3779B97F4A7C15ULL);
  std::vector<std::size_t> order(train_set.labels.size());
  std::iota(order.begin(), order.end(), 0);

  const auto dim = static_cast<Eigen::Index>(config.input_dim);
  Matrix<float> batch;
  std::vector<float> batch_labels;
  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    const double lr = lr_at(epoch, config);
    rng::shuffle(std::span<std::size_t>(order), shuffle_gen);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t len = std::min(config.batch_size, order.size() - start);
      batch.resize(static_cast<Eigen::Index>(len), dim);
      batch_labels.resize(len);
      for (std::size_t i = 0; i < len; ++i) {
        const std::size_t src = order[start + i];
        batch.row(static_cast<Eigen::Index>(i)) = train_set.x.row(static_cast<Eigen::Index>(src));
        batch_labels[i] = train_set.labels[src];
      }
      const auto grads = backward<float>(model.layers, batch, batch_labels);
      loss_sum += static_cast<double>(grads.loss) * static_cast<double>(len);
      sgd_step(model, grads, lr);
    }

    const auto scores = predict(model, val_set.x);
    for (double s : scores) {
      if (!std::isfinite(s)) {
        fail(ErrorCode::kValidation,
             "training diverged at epoch " + std::to_string(epoch) + " (non-finite outputs)");
      }
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.val_auc = metrics::roc_auc(scores, val_labels);
    const auto cm = metrics::confusion_at_threshold(scores, val_labels);
    rec.val_accuracy = 100.0 * static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
    rec.val_loss = bce_loss(scores, val_set.labels);
    result.history.epochs.push_back(rec);
    if (options.on_epoch) options.on_epoch(rec);

    // AUC saturates on separable data long before the outputs are calibrated,
    // so equal AUC falls back to validation loss.
    if (rec.val_auc > best_auc || (rec.val_auc == best_auc && rec.val_loss < best_loss)) {
      best_auc = rec.val_auc;
      best_loss = rec.val_loss;
      best_layers = model.layers;
      result.history.best_epoch = epoch;
    } else if (epoch - result.history.best_epoch >= config.early_stop_patience) {
      break;
    }
  }
  model.layers = std::move(best_layers);
  return result;
}

}  // namespace diffdetect::trainer
