#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "corpus/manifest.hpp"
#include "embedding/store.hpp"
#include "metrics/metrics.hpp"
#include "trainer/mlp.hpp"

namespace diffdetect::experiments {

// One cell of the experiment grid: a detector trained against
// `train_generator` and scored on the Test split of each test generator.
struct ExperimentSpec {
  std::string name;
  std::string model = "MLP-Base";
  std::string dataset;
  corpus::Generator train_generator = corpus::Generator::stable_diffusion();
  std::vector<corpus::Generator> test_generators;  // empty means {train_generator}
  std::string backbone;                            // feature label, e.g. "clip-vit"
  trainer::MlpConfig mlp;                          // feature_mode and seed live here
  std::filesystem::path manifest;
  std::filesystem::path features;
  bool has_seed = false;

  std::vector<corpus::Generator> effective_test_generators() const;
};

struct GridSpec {
  std::vector<ExperimentSpec> cells;
};

// Grid JSON:
//   {"cells": [{"name": str, "model": str?, "dataset": str,
//               "train_generator": str, "test_generators": [str]?,
//               "mode": "image"|"image_text", "backbone": str,
//               "seed": int?, "manifest": path, "features": path,
//               "mlp": {"hidden_dims": [int], "lr_start": real, "lr_end": real,
//                       "max_epochs": int, "batch_size": int,
//                       "early_stop_patience": int, "l2_normalize": bool}?}]}
// Relative paths resolve against `base_dir`. A cell without "seed" takes
// `default_seed`; if neither is given the grid is rejected.
GridSpec parse_grid(const nlohmann::json& j, const std::filesystem::path& base_dir,
                    std::optional<std::uint64_t> default_seed = std::nullopt);
GridSpec load_grid(const std::filesystem::path& path,
                   std::optional<std::uint64_t> default_seed = std::nullopt);

struct Prediction {
  std::string id;
  int label = 0;  // 1 = generated
  double score = 0;
  int predicted = 0;
  std::string macro_category;
};

struct Evaluation {
  metrics::EvalReport report;
  std::vector<Prediction> predictions;
};

// Scores the Test split of `manifest` restricted to real records plus the
// records of `test_generator` (every generated record when unset).
Evaluation evaluate_model(const trainer::MlpModel& model, const embedding::EmbeddingStore& store,
                          const corpus::Manifest& manifest,
                          const std::optional<corpus::Generator>& test_generator,
                          metrics::CellMetadata cell,
                          double threshold = metrics::kDefaultThreshold);

std::string predictions_to_jsonl(const std::vector<Prediction>& predictions);
std::vector<Prediction> parse_predictions(std::string_view jsonl);

metrics::CategoryErrorReport category_errors(const std::vector<Prediction>& predictions,
                                             double threshold = metrics::kDefaultThreshold);

// Intra-generator cell: train and test generator coincide.
Evaluation run_intra(const ExperimentSpec& spec);

using CrossKey = std::pair<std::string, std::string>;  // (train, test) generator names

struct CrossMatrix {
  std::map<CrossKey, Evaluation> cells;
};

// Trains once per spec and evaluates every test generator the spec lists.
CrossMatrix run_cross(const std::vector<ExperimentSpec>& specs);

struct GridOutputs {
  std::vector<metrics::EvalReport> reports;
  std::vector<std::filesystem::path> files;
};

// Runs every cell and writes reports/, tables/ under `out_dir`. Reports are
// merged in grid order.
GridOutputs run_grid(const GridSpec& grid, const std::filesystem::path& out_dir);

}  // namespace diffdetect::experiments
