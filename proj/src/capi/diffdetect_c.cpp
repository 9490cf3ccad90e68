#include "diffdetect/diffdetect.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <filesystem>
#include <new>
#include <string>

#include "common/error.hpp"
#include "common/io.hpp"
#include "corpus/manifest.hpp"
#include "embedding/backend.hpp"
#include "embedding/bpe_tokenizer.hpp"
#include "embedding/extract.hpp"
#include "embedding/profile.hpp"
#include "experiments/figure.hpp"
#include "experiments/grid.hpp"
#include "experiments/render.hpp"
#include "linguistics/linguistics.hpp"
#include "trainer/checkpoint.hpp"
#include "trainer/train.hpp"

using namespace diffdetect;

struct dd_manifest {
  corpus::Manifest m;
};

struct dd_model {
  trainer::MlpModel m;
};

namespace {

thread_local std::string g_last_error;

dd_status to_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return DD_ERR_INVALID_ARGUMENT;
    case ErrorCode::kIo: return DD_ERR_IO;
    case ErrorCode::kParse: return DD_ERR_PARSE;
    case ErrorCode::kValidation: return DD_ERR_VALIDATION;
    case ErrorCode::kBackend: return DD_ERR_BACKEND;
    case ErrorCode::kDimensionMismatch: return DD_ERR_DIMENSION_MISMATCH;
    case ErrorCode::kUndefined: return DD_ERR_UNDEFINED;
    case ErrorCode::kFormat: return DD_ERR_FORMAT;
  }
  return DD_ERR_INTERNAL;
}

template <typename F>
dd_status guard(F&& f) {
  g_last_error.clear();
  try {
    f();
    return DD_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    g_last_error = e.what();
    return DD_ERR_IO;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return DD_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return DD_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown failure";
    return DD_ERR_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (!p) fail(ErrorCode::kInvalidArgument, std::string(what) + " is null");
}

std::string str_or(const char* s, const char* fallback) { return s ? s : fallback; }

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::vector<std::size_t> hidden_dims(const size_t* dims, size_t n) {
  return {dims, dims + n};
}

}  // namespace

extern "C" {

const char* dd_version(void) { return "0.1.0"; }

const char* dd_last_error(void) { return g_last_error.c_str(); }

const char* dd_status_name(dd_status status) {
  switch (status) {
    case DD_OK: return "ok";
    case DD_ERR_INVALID_ARGUMENT: return "invalid argument";
    case DD_ERR_IO: return "io error";
    case DD_ERR_PARSE: return "parse error";
    case DD_ERR_VALIDATION: return "validation error";
    case DD_ERR_BACKEND: return "backend error";
    case DD_ERR_DIMENSION_MISMATCH: return "dimension mismatch";
    case DD_ERR_UNDEFINED: return "undefined";
    case DD_ERR_FORMAT: return "format error";
    case DD_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void dd_string_free(char* s) { std::free(s); }

void dd_protocol_options_init(dd_protocol_options* o) {
  if (!o) return;
  const corpus::ProtocolOptions d;
  *o = dd_protocol_options{};
  o->train_real = d.train_real;
  o->val_real = d.val_real;
  o->test_real = d.test_real;
}

dd_status dd_manifest_load(const char* path, int check_paired, dd_manifest** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    *out = nullptr;
    auto m = corpus::parse_manifest(path, {check_paired != 0});
    *out = new dd_manifest{std::move(m)};
  });
}

dd_status dd_manifest_synthetic(const dd_protocol_options* options, dd_manifest** out) {
  return guard([&] {
    require(options, "options");
    require(out, "out");
    *out = nullptr;
    corpus::ProtocolOptions p;
    p.train_real = options->train_real;
    p.val_real = options->val_real;
    p.test_real = options->test_real;
    if (options->generators) {
      p.generators.clear();
      for (size_t i = 0; i < options->n_generators; ++i) {
        require(options->generators[i], "generator name");
        p.generators.push_back(corpus::Generator::parse(options->generators[i]));
      }
    }
    if (options->dataset) p.dataset = corpus::Dataset::parse(options->dataset);
    p.with_categories = options->with_categories != 0;
    *out = new dd_manifest{corpus::make_protocol_manifest(p)};
  });
}

dd_status dd_manifest_merge(const dd_manifest* const* parts, size_t n_parts, int check_paired,
                            dd_manifest** out) {
  return guard([&] {
    require(out, "out");
    *out = nullptr;
    if (n_parts) require(parts, "parts");
    std::vector<corpus::Manifest> ms;
    for (size_t i = 0; i < n_parts; ++i) {
      require(parts[i], "manifest part");
      ms.push_back(parts[i]->m);
    }
    *out = new dd_manifest{corpus::merge(ms, {check_paired != 0})};
  });
}

dd_status dd_manifest_save(const dd_manifest* manifest, const char* path) {
  return guard([&] {
    require(manifest, "manifest");
    require(path, "path");
    corpus::write_manifest(manifest->m, path);
  });
}

size_t dd_manifest_size(const dd_manifest* manifest) {
  return manifest ? manifest->m.records.size() : 0;
}

dd_status dd_manifest_split_counts(const dd_manifest* manifest, dd_split_counts* out) {
  return guard([&] {
    require(manifest, "manifest");
    require(out, "out");
    const auto c = corpus::split_counts(manifest->m);
    using corpus::Label;
    using corpus::Split;
    *out = {c.at(Split::kTrain, Label::kReal), c.at(Split::kTrain, Label::kGenerated),
            c.at(Split::kVal, Label::kReal),   c.at(Split::kVal, Label::kGenerated),
            c.at(Split::kTest, Label::kReal),  c.at(Split::kTest, Label::kGenerated)};
  });
}

void dd_manifest_free(dd_manifest* manifest) { delete manifest; }

void dd_extract_options_init(dd_extract_options* o) {
  if (!o) return;
  *o = dd_extract_options{};
  o->backbone = "stub";
  o->mode = "image";
  o->workers = 1;
}

dd_status dd_extract(const char* manifest_path, const dd_extract_options* options,
                     const char* out_path) {
  return guard([&] {
    require(manifest_path, "manifest_path");
    require(options, "options");
    require(out_path, "out_path");
    require(options->backbone, "backbone");
    const auto manifest = corpus::parse_manifest(manifest_path);
    embedding::ExtractOptions eo;
    eo.mode = embedding::parse_feature_mode(str_or(options->mode, "image"));
    eo.image_root = str_or(options->image_root, ".");
    eo.workers = options->workers;

    const std::string backbone = options->backbone;
    const bool stub = backbone == "stub";
    const auto profile = embedding::resolve_profile(backbone);
    const bool needs_text = eo.mode == embedding::FeatureMode::kImageText &&
                            (!stub || options->stub_content_mode);
    std::shared_ptr<const embedding::BpeTokenizer> tokenizer;
    if (needs_text) {
      tokenizer = std::make_shared<const embedding::BpeTokenizer>(
          embedding::BpeTokenizer::load(profile.vocab_path, profile.merges_path));
    }

    embedding::BackendFactory factory;
    if (stub) {
      embedding::StubOptions so;
      so.seed = options->stub_seed;
      so.keyed_on_id = !options->stub_content_mode;
      if (options->n_biases) require(options->biases, "biases");
      for (size_t i = 0; i < options->n_biases; ++i) {
        const auto& b = options->biases[i];
        embedding::PlantedBias pb;
        if (b.generator) pb.generator = corpus::Generator::parse(b.generator);
        if (b.axis >= static_cast<uint32_t>(profile.image_dim) ||
            (eo.mode == embedding::FeatureMode::kImageText &&
             b.axis >= static_cast<uint32_t>(profile.text_dim))) {
          fail(ErrorCode::kInvalidArgument, "planted bias axis out of range");
        }
        pb.direction = static_cast<int>(b.axis);
        pb.magnitude = b.magnitude;
        so.biases.push_back(pb);
      }
      factory = [profile, so, tokenizer] {
        return std::make_unique<embedding::StubBackend>(profile, so, tokenizer);
      };
    } else {
      if (options->n_biases) {
        fail(ErrorCode::kInvalidArgument, "planted biases need the stub backbone");
      }
      factory = [profile, tokenizer] {
        return std::make_unique<embedding::OnnxBackend>(profile, tokenizer);
      };
    }
    embedding::extract_corpus_to_file(manifest, factory, eo, out_path);
  });
}

void dd_train_options_init(dd_train_options* o) {
  if (!o) return;
  const trainer::MlpConfig d;
  *o = dd_train_options{};
  o->mode = "image";
  o->lr_start = d.lr_start;
  o->lr_end = d.lr_end;
  o->max_epochs = d.max_epochs;
  o->batch_size = d.batch_size;
  o->early_stop_patience = d.early_stop_patience;
}

dd_status dd_train(const char* features_path, const char* manifest_path,
                   const dd_train_options* options, const char* checkpoint_out) {
  return guard([&] {
    require(features_path, "features_path");
    require(manifest_path, "manifest_path");
    require(options, "options");
    require(checkpoint_out, "checkpoint_out");
    auto manifest = corpus::parse_manifest(manifest_path);
    if (options->generator) {
      const auto g = corpus::Generator::parse(options->generator);
      manifest = corpus::filter(manifest, [&](const corpus::SampleRecord& r) {
        return r.label == corpus::Label::kReal || r.generator == g;
      });
    }
    const auto store = embedding::read_store(features_path);

    trainer::MlpConfig config;
    config.feature_mode = embedding::parse_feature_mode(str_or(options->mode, "image"));
    config.seed = options->seed;
    if (options->hidden_dims) config.hidden_dims = hidden_dims(options->hidden_dims, options->n_hidden);
    config.lr_start = options->lr_start;
    config.lr_end = options->lr_end;
    config.max_epochs = options->max_epochs;
    config.batch_size = options->batch_size;
    config.early_stop_patience = options->early_stop_patience;
    config.l2_normalize = options->l2_normalize != 0;

    trainer::TrainOptions to;
    to.include_degenerate = options->include_degenerate != 0;
    if (options->on_epoch) {
      to.on_epoch = [options](const trainer::EpochRecord& e) {
        options->on_epoch(e.epoch, e.lr, e.train_loss, e.val_accuracy, e.val_auc, options->user);
      };
    }
    const auto result = trainer::train(store, manifest, config, to);
    trainer::save_checkpoint(result.model, checkpoint_out);
    if (options->history_csv) io::write_file_atomic(options->history_csv, result.history.to_csv());
  });
}

dd_status dd_param_count(size_t input_dim, const size_t* dims, size_t n_hidden, uint64_t* out) {
  return guard([&] {
    require(out, "out");
    if (n_hidden) require(dims, "hidden_dims");
    trainer::MlpConfig c;
    c.input_dim = input_dim;
    c.hidden_dims = hidden_dims(dims, n_hidden);
    c.validate();
    *out = trainer::param_count(c);
  });
}

dd_status dd_model_load(const char* checkpoint_path, dd_model** out) {
  return guard([&] {
    require(checkpoint_path, "checkpoint_path");
    require(out, "out");
    *out = nullptr;
    *out = new dd_model{trainer::load_checkpoint(checkpoint_path)};
  });
}

size_t dd_model_input_dim(const dd_model* model) { return model ? model->m.config.input_dim : 0; }

uint64_t dd_model_param_count(const dd_model* model) {
  return model ? trainer::param_count(model->m.config) : 0;
}

dd_status dd_model_predict(const dd_model* model, const float* x, size_t rows, double* out) {
  return guard([&] {
    require(model, "model");
    if (rows == 0) return;
    require(x, "x");
    require(out, "out");
    const auto cols = static_cast<Eigen::Index>(model->m.config.input_dim);
    const trainer::Matrix<float> m =
        Eigen::Map<const trainer::Matrix<float>>(x, static_cast<Eigen::Index>(rows), cols);
    const auto p = trainer::predict(model->m, m);
    std::copy(p.begin(), p.end(), out);
  });
}

void dd_model_free(dd_model* model) { delete model; }

void dd_eval_options_init(dd_eval_options* o) {
  if (!o) return;
  *o = dd_eval_options{};
  o->threshold = metrics::kDefaultThreshold;
}

dd_status dd_evaluate(const char* checkpoint_path, const char* features_path,
                      const char* manifest_path, const dd_eval_options* options,
                      const char* report_out, const char* predictions_out) {
  return guard([&] {
    require(checkpoint_path, "checkpoint_path");
    require(features_path, "features_path");
    require(manifest_path, "manifest_path");
    require(options, "options");
    require(report_out, "report_out");
    const auto model = trainer::load_checkpoint(checkpoint_path);
    const std::string manifest_bytes = io::read_file(manifest_path);
    const auto manifest = corpus::parse_manifest_text(manifest_bytes);
    const std::string store_bytes = io::read_file(features_path);
    const auto store = embedding::deserialize_store(store_bytes);

    std::optional<corpus::Generator> test_generator;
    if (options->test_generator) test_generator = corpus::Generator::parse(options->test_generator);
    metrics::CellMetadata cell;
    cell.model = str_or(options->model_name, "MLP-Base");
    cell.dataset = str_or(options->dataset, "");
    cell.mode = std::string(embedding::to_string(model.config.feature_mode));
    cell.features = str_or(options->backbone, "");
    cell.train_generator = str_or(options->train_generator, "");
    cell.test_generator = test_generator ? test_generator->name() : "all";
    cell.seed = model.config.seed;
    cell.manifest_sha256 = io::sha256_hex(manifest_bytes);
    cell.features_sha256 = io::sha256_hex(store_bytes);

    const auto ev = experiments::evaluate_model(model, store, manifest, test_generator,
                                                std::move(cell), options->threshold);
    io::write_file_atomic(report_out, metrics::to_json(ev.report).dump(2) + "\n");
    if (predictions_out) {
      io::write_file_atomic(predictions_out, experiments::predictions_to_jsonl(ev.predictions));
    }
  });
}

dd_status dd_run_grid(const char* grid_path, const char* out_dir, uint64_t default_seed,
                      int has_default_seed) {
  return guard([&] {
    require(grid_path, "grid_path");
    require(out_dir, "out_dir");
    std::optional<std::uint64_t> seed;
    if (has_default_seed) seed = default_seed;
    experiments::run_grid(experiments::load_grid(grid_path, seed), out_dir);
  });
}

dd_status dd_render_tables(const char* const* report_paths, size_t n_reports,
                           dd_table_format format, dd_table_layout layout, char** out) {
  return guard([&] {
    require(out, "out");
    *out = nullptr;
    if (n_reports) require(report_paths, "report_paths");
    std::vector<metrics::EvalReport> reports;
    for (size_t i = 0; i < n_reports; ++i) {
      require(report_paths[i], "report path");
      const std::string text = io::read_file(report_paths[i]);
      try {
        reports.push_back(metrics::eval_report_from_json(nlohmann::json::parse(text)));
      } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorCode::kParse, std::string(report_paths[i]) + ": " + e.what());
      }
    }
    const auto text = experiments::render_tables(
        reports, format == DD_TABLE_CSV ? experiments::TableFormat::kCsv
                                        : experiments::TableFormat::kMarkdown,
        layout == DD_LAYOUT_CROSS ? experiments::TableLayout::kCross
                                  : experiments::TableLayout::kIntra);
    *out = dup_string(text);
  });
}

dd_status dd_analyze_categories(const char* predictions_path, const char* report_path,
                                double threshold, const char* json_out, char** table_out) {
  return guard([&] {
    require(predictions_path, "predictions_path");
    if (table_out) *table_out = nullptr;
    const auto preds = experiments::parse_predictions(io::read_file(predictions_path));
    experiments::CategoryRow row;
    row.report = experiments::category_errors(preds, threshold);
    if (report_path) {
      try {
        row.cell = metrics::eval_report_from_json(nlohmann::json::parse(io::read_file(report_path))).cell;
      } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorCode::kParse, std::string(report_path) + ": " + e.what());
      }
    }
    if (json_out) io::write_file_atomic(json_out, metrics::to_json(row.report).dump(2) + "\n");
    if (table_out) {
      *table_out = dup_string(experiments::render_category_table(
          std::span<const experiments::CategoryRow>(&row, 1), experiments::TableFormat::kMarkdown));
    }
  });
}

dd_status dd_analyze_linguistics(const char* annotations_path, const char* predictions_path,
                                 dd_correlation_target target, const char* model_name,
                                 const char* generator, const char* dataset,
                                 const char* json_out) {
  return guard([&] {
    require(annotations_path, "annotations_path");
    require(predictions_path, "predictions_path");
    require(json_out, "json_out");
    const auto annotations = linguistics::parse_annotations(annotations_path);
    std::map<std::string, linguistics::LinguisticProfile> profiles;
    for (const auto& [id, a] : annotations) {
      profiles.emplace(id, linguistics::profile(a.caption, a.tokens, a.n_entities));
    }
    std::map<std::string, int> outcomes;
    for (const auto& p : experiments::parse_predictions(io::read_file(predictions_path))) {
      outcomes[p.id] = target == DD_TARGET_PREDICTION ? p.predicted : (p.predicted == p.label);
    }
    auto report = linguistics::correlation_report(profiles, outcomes);
    report.model = str_or(model_name, "");
    report.generator = str_or(generator, "");
    report.dataset = str_or(dataset, "");
    io::write_file_atomic(json_out, linguistics::to_json(report).dump(2) + "\n");
  });
}

dd_status dd_plot(const char* correlation_json_path, const char* svg_out) {
  return guard([&] {
    require(correlation_json_path, "correlation_json_path");
    require(svg_out, "svg_out");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(io::read_file(correlation_json_path));
    } catch (const nlohmann::json::parse_error& e) {
      fail(ErrorCode::kParse, std::string(correlation_json_path) + ": " + e.what());
    }
    const auto report = linguistics::correlation_report_from_json(j);
    io::write_file_atomic(svg_out, experiments::render_correlation_svg(report));
  });
}

dd_status dd_gradcheck(int trials, uint64_t seed, double epsilon, double* max_relative_error,
                       size_t* parameters_checked) {
  return guard([&] {
    if (trials <= 0) fail(ErrorCode::kInvalidArgument, "trials must be positive");
    if (!(epsilon > 0)) fail(ErrorCode::kInvalidArgument, "epsilon must be positive");
    const auto r = trainer::random_gradient_check(trials, seed, epsilon);
    if (max_relative_error) *max_relative_error = r.max_relative_error;
    if (parameters_checked) *parameters_checked = r.parameters_checked;
  });
}

}  // extern "C"
