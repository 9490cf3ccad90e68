#include "experiments/grid.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "common/error.hpp"
#include "common/io.hpp"
#include "experiments/render.hpp"
#include "trainer/train.hpp"

namespace diffdetect::experiments {

namespace fs = std::filesystem;

std::vector<corpus::Generator> ExperimentSpec::effective_test_generators() const {
  return test_generators.empty() ? std::vector<corpus::Generator>{train_generator} : test_generators;
}

GridSpec parse_grid(const nlohmann::json& j, const fs::path& base_dir,
                    std::optional<std::uint64_t> default_seed) {
  auto resolve = [&](const std::string& p) {
    fs::path fp(p);
    return fp.is_absolute() ? fp : base_dir / fp;
  };
  GridSpec grid;
  try {
    std::set<std::string> names;
    for (const auto& c : j.at("cells")) {
      ExperimentSpec s;
      s.name = c.at("name").get<std::string>();
      if (!names.insert(s.name).second) {
        fail(ErrorCode::kValidation, "grid: duplicate cell name \"" + s.name + "\"");
      }
      s.model = c.value("model", s.model);
      s.dataset = c.at("dataset").get<std::string>();
      s.train_generator = corpus::Generator::parse(c.at("train_generator").get<std::string>());
      if (s.train_generator.kind() == corpus::Generator::Kind::kNone) {
        fail(ErrorCode::kValidation, "grid: cell \"" + s.name + "\" needs a real generator");
      }
      for (const auto& g : c.value("test_generators", std::vector<std::string>{})) {
        s.test_generators.push_back(corpus::Generator::parse(g));
      }
      s.backbone = c.at("backbone").get<std::string>();
      s.manifest = resolve(c.at("manifest").get<std::string>());
      s.features = resolve(c.at("features").get<std::string>());
      s.mlp.feature_mode = embedding::parse_feature_mode(c.value("mode", std::string("image")));
      if (c.contains("seed")) {
        s.mlp.seed = c.at("seed").get<std::uint64_t>();
        s.has_seed = true;
      } else if (default_seed) {
        s.mlp.seed = *default_seed;
        s.has_seed = true;
      } else {
        fail(ErrorCode::kValidation, "grid: cell \"" + s.name + "\" has no seed");
      }
      if (c.contains("mlp")) {
        const auto& m = c.at("mlp");
        s.mlp.hidden_dims = m.value("hidden_dims", s.mlp.hidden_dims);
        s.mlp.lr_start = m.value("lr_start", s.mlp.lr_start);
        s.mlp.lr_end = m.value("lr_end", s.mlp.lr_end);
        s.mlp.max_epochs = m.value("max_epochs", s.mlp.max_epochs);
        s.mlp.batch_size = m.value("batch_size", s.mlp.batch_size);
        s.mlp.early_stop_patience = m.value("early_stop_patience", s.mlp.early_stop_patience);
        s.mlp.l2_normalize = m.value("l2_normalize", s.mlp.l2_normalize);
      }
      grid.cells.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, std::string("grid: ") + e.what());
  }
  return grid;
}

GridSpec load_grid(const fs::path& path, std::optional<std::uint64_t> default_seed) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::kParse, path.string() + ": " + e.what());
  }
  return parse_grid(j, path.parent_path(), default_seed);
}

Evaluation evaluate_model(const trainer::MlpModel& model, const embedding::EmbeddingStore& store,
                          const corpus::Manifest& manifest,
                          const std::optional<corpus::Generator>& test_generator,
                          metrics::CellMetadata cell, double threshold) {
  const auto keep = [&](const corpus::SampleRecord& r) {
    return r.split == corpus::Split::kTest &&
           (r.label == corpus::Label::kReal || !test_generator || r.generator == *test_generator);
  };
  const auto fm = trainer::assemble_features(store, manifest, keep, model.config.feature_mode,
                                             model.config.l2_normalize);
  if (fm.labels.empty()) fail(ErrorCode::kValidation, "empty test split");
  if (fm.x.cols() != static_cast<Eigen::Index>(model.config.input_dim)) {
    fail(ErrorCode::kDimensionMismatch, "features do not match the model input width");
  }
  Evaluation ev;
  const auto scores = trainer::predict(model, fm.x);
  std::vector<int> labels(fm.labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = fm.labels[i] > 0.5f ? 1 : 0;
  ev.report = metrics::evaluate(scores, labels, std::move(cell), threshold);
  ev.predictions.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto& rec = manifest.records[fm.records[i]];
    ev.predictions.push_back({rec.id, labels[i], scores[i], scores[i] >= threshold ? 1 : 0,
                              std::string(corpus::to_string(rec.macro_category))});
  }
  return ev;
}

std::string predictions_to_jsonl(const std::vector<Prediction>& predictions) {
  std::string out;
  for (const auto& p : predictions) {
    nlohmann::ordered_json j;
    j["id"] = p.id;
    j["label"] = p.label;
    j["score"] = p.score;
    j["predicted"] = p.predicted;
    j["correct"] = p.predicted == p.label ? 1 : 0;
    j["macro_category"] = p.macro_category;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<Prediction> parse_predictions(std::string_view jsonl) {
  std::vector<Prediction> out;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < jsonl.size()) {
    std::size_t end = jsonl.find('\n', pos);
    if (end == std::string_view::npos) end = jsonl.size();
    const auto line = jsonl.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back({j.at("id").get<std::string>(), j.at("label").get<int>(),
                     j.at("score").get<double>(), j.at("predicted").get<int>(),
                     j.value("macro_category", std::string("unknown"))});
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::kParse, "predictions line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

metrics::CategoryErrorReport category_errors(const std::vector<Prediction>& predictions,
                                             double threshold) {
  std::vector<double> scores;
  std::vector<int> labels;
  std::vector<std::string> cats;
  for (const auto& p : predictions) {
    scores.push_back(p.score);
    labels.push_back(p.label);
    cats.push_back(p.macro_category);
  }
  return metrics::category_error_rates(scores, labels, cats, threshold);
}

namespace {

struct CellInputs {
  corpus::Manifest manifest;
  embedding::EmbeddingStore store;
  std::string manifest_sha;
  std::string store_sha;
};

CellInputs load_inputs(const ExperimentSpec& spec) {
  CellInputs in;
  const std::string manifest_bytes = io::read_file(spec.manifest);
  in.manifest = corpus::parse_manifest_text(manifest_bytes);
  in.manifest_sha = io::sha256_hex(manifest_bytes);
  const std::string store_bytes = io::read_file(spec.features);
  in.store = embedding::deserialize_store(store_bytes);
  in.store_sha = io::sha256_hex(store_bytes);
  if (spec.mlp.feature_mode == embedding::FeatureMode::kImageText && !in.store.has_text()) {
    fail(ErrorCode::kValidation, "cell \"" + spec.name + "\": image+text mode needs text vectors");
  }
  return in;
}

void require_generator(const corpus::Manifest& m, const corpus::Generator& g,
                       const std::string& cell) {
  for (const auto& r : m.records) {
    if (r.generator == g) return;
  }
  fail(ErrorCode::kValidation,
       "cell \"" + cell + "\": generator \"" + g.name() + "\" missing from manifest");
}

trainer::MlpModel train_cell(const ExperimentSpec& spec, const CellInputs& in) {
  require_generator(in.manifest, spec.train_generator, spec.name);
  const auto population = corpus::filter(in.manifest, [&](const corpus::SampleRecord& r) {
    return r.split != corpus::Split::kTest &&
           (r.label == corpus::Label::kReal || r.generator == spec.train_generator);
  });
  return trainer::train(in.store, population, spec.mlp).model;
}

metrics::CellMetadata metadata(const ExperimentSpec& spec, const CellInputs& in,
                               const corpus::Generator& test_generator) {
  metrics::CellMetadata cell;
  cell.model = spec.model;
  cell.dataset = spec.dataset;
  cell.mode = std::string(embedding::to_string(spec.mlp.feature_mode));
  cell.features = spec.backbone;
  cell.train_generator = spec.train_generator.name();
  cell.test_generator = test_generator.name();
  cell.seed = spec.mlp.seed;
  cell.manifest_sha256 = in.manifest_sha;
  cell.features_sha256 = in.store_sha;
  return cell;
}

// Shared by run_intra, run_cross and run_grid so diagonal cells are the
// same computation.
std::vector<std::pair<corpus::Generator, Evaluation>> run_cell(const ExperimentSpec& spec) {
  const CellInputs in = load_inputs(spec);
  const auto model = train_cell(spec, in);
  std::vector<std::pair<corpus::Generator, Evaluation>> out;
  for (const auto& g : spec.effective_test_generators()) {
    require_generator(in.manifest, g, spec.name);
    out.emplace_back(g, evaluate_model(model, in.store, in.manifest, g, metadata(spec, in, g)));
  }
  return out;
}

}  // namespace

Evaluation run_intra(const ExperimentSpec& spec) {
  ExperimentSpec intra = spec;
  intra.test_generators = {spec.train_generator};
  return std::move(run_cell(intra).front().second);
}

CrossMatrix run_cross(const std::vector<ExperimentSpec>& specs) {
  CrossMatrix matrix;
  for (const auto& spec : specs) {
    for (auto& [g, ev] : run_cell(spec)) {
      matrix.cells[{spec.train_generator.name(), g.name()}] = std::move(ev);
    }
  }
  return matrix;
}

GridOutputs run_grid(const GridSpec& grid, const fs::path& out_dir) {
  const fs::path reports_dir = out_dir / "reports";
  const fs::path tables_dir = out_dir / "tables";
  fs::create_directories(reports_dir);
  fs::create_directories(tables_dir);

  GridOutputs outputs;
  std::vector<metrics::EvalReport> diagonal;
  std::vector<CategoryRow> category_rows;
  auto write = [&](const fs::path& p, const std::string& text) {
    io::write_file_atomic(p, text);
    outputs.files.push_back(p);
  };

  for (const auto& spec : grid.cells) {
    for (const auto& [g, ev] : run_cell(spec)) {
      const std::string stem = spec.name + "__" + g.name();
      write(reports_dir / (stem + ".json"), metrics::to_json(ev.report).dump(2) + "\n");
      write(reports_dir / (stem + ".predictions.jsonl"), predictions_to_jsonl(ev.predictions));
      const bool categorised = std::any_of(ev.predictions.begin(), ev.predictions.end(),
                                           [](const Prediction& p) {
                                             return p.macro_category != "unknown";
                                           });
      if (categorised) {
        const auto cat = category_errors(ev.predictions);
        write(reports_dir / (stem + ".categories.json"), metrics::to_json(cat).dump(2) + "\n");
        category_rows.push_back({ev.report.cell, cat});
      }
      if (g == spec.train_generator) diagonal.push_back(ev.report);
      outputs.reports.push_back(ev.report);
    }
  }

  write(tables_dir / "intra.md", render_tables(diagonal, TableFormat::kMarkdown, TableLayout::kIntra));
  write(tables_dir / "intra.csv", render_tables(diagonal, TableFormat::kCsv, TableLayout::kIntra));
  write(tables_dir / "cross.md",
        render_tables(outputs.reports, TableFormat::kMarkdown, TableLayout::kCross));
  write(tables_dir / "cross.csv", render_tables(outputs.reports, TableFormat::kCsv, TableLayout::kCross));
  if (!category_rows.empty()) {
    write(tables_dir / "categories.md", render_category_table(category_rows, TableFormat::kMarkdown));
  }
  return outputs;
}

}  // namespace diffdetect::experiments
