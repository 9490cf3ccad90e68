// diffdetect: command-line front end over the C API.
// Exit codes: 0 success, 1 usage error, 2 runtime failure.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "diffdetect/diffdetect.h"

namespace {

constexpr int kUsage = 1;
constexpr int kRuntime = 2;

int report(dd_status st) {
  if (st == DD_OK) return 0;
  std::cerr << "diffdetect: " << dd_status_name(st) << ": " << dd_last_error() << "\n";
  return kRuntime;
}

const std::vector<std::string> kModes = {"image", "image_text"};

struct Plant {
  std::string generator;
  dd_planted_bias bias{};
};

// "<generator>:<axis>:<magnitude>", generator "*" meaning every generated sample.
std::optional<Plant> parse_plant(const std::string& s) {
  const auto a = s.find(':');
  const auto b = s.find(':', a == std::string::npos ? a : a + 1);
  if (a == std::string::npos || b == std::string::npos) return std::nullopt;
  Plant p;
  p.generator = s.substr(0, a);
  try {
    std::size_t used = 0;
    const std::string axis = s.substr(a + 1, b - a - 1);
    const long v = std::stol(axis, &used);
    if (used != axis.size() || v < 0) return std::nullopt;
    p.bias.axis = static_cast<uint32_t>(v);
    const std::string mag = s.substr(b + 1);
    p.bias.magnitude = std::stof(mag, &used);
    if (used != mag.size()) return std::nullopt;
  } catch (const std::exception&) {
    return std::nullopt;
  }
  return p;
}

void print_text(char* text) {
  if (text) std::fputs(text, stdout);
  dd_string_free(text);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Detect diffusion-generated images from frozen vision-language embeddings", "diffdetect"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(dd_version()));

  // build-manifest
  auto* bm = app.add_subcommand("build-manifest", "Merge manifest parts or generate a synthetic one");
  std::vector<std::string> bm_parts;
  std::string bm_out;
  bool bm_paired = false, bm_synthetic = false, bm_categories = false;
  std::size_t bm_train = 6000, bm_val = 1500, bm_test = 6000;
  std::vector<std::string> bm_generators;
  std::string bm_dataset = "mscoco";
  bm->add_option("--part", bm_parts, "Manifest JSONL to merge, in order (repeatable)")
      ->check(CLI::ExistingFile);
  bm->add_flag("--synthetic", bm_synthetic, "Generate a protocol-shaped manifest instead");
  bm->add_option("--train-real", bm_train, "Synthetic: real Train records")->capture_default_str();
  bm->add_option("--val-real", bm_val, "Synthetic: real Val records")->capture_default_str();
  bm->add_option("--test-real", bm_test, "Synthetic: real Test records")->capture_default_str();
  bm->add_option("--generator", bm_generators,
                 "Synthetic: generator per real record (repeatable, default stable_diffusion)");
  bm->add_option("--dataset", bm_dataset, "Synthetic: dataset tag")->capture_default_str();
  bm->add_flag("--categories", bm_categories, "Synthetic: assign category tags");
  bm->add_flag("--paired", bm_paired, "Require generated captions to match a real caption");
  bm->add_option("--out", bm_out, "Output manifest JSONL")->required();

  // extract
  auto* ex = app.add_subcommand("extract", "Embed every manifest record into a feature store");
  std::string ex_manifest, ex_backbone, ex_mode = "image", ex_out, ex_root = ".";
  unsigned ex_workers = 1;
  uint64_t ex_seed = 0;
  std::vector<std::string> ex_plants;
  bool ex_content = false;
  ex->add_option("--manifest", ex_manifest, "Manifest JSONL")->required()->check(CLI::ExistingFile);
  ex->add_option("--backbone", ex_backbone, "stub, clip-vit, clip-rn50 or a profile JSON")->required();
  ex->add_option("--mode", ex_mode, "image or image_text")->check(CLI::IsMember(kModes))->capture_default_str();
  ex->add_option("--out", ex_out, "Output feature store (.demb)")->required();
  ex->add_option("--image-root", ex_root, "Directory image paths are relative to")->capture_default_str();
  ex->add_option("--workers", ex_workers, "Worker threads, 0 = all cores")->capture_default_str();
  ex->add_option("--stub-seed", ex_seed, "Stub backbone seed")->capture_default_str();
  ex->add_option("--plant", ex_plants,
                 "Stub planted bias <generator|*>:<axis>:<magnitude> (repeatable)");
  ex->add_flag("--stub-content", ex_content, "Stub hashes decoded inputs rather than ids");

  // train
  auto* tr = app.add_subcommand("train", "Train the MLP detector");
  std::string tr_features, tr_manifest, tr_mode = "image", tr_out, tr_generator, tr_history;
  uint64_t tr_seed = 0;
  std::vector<std::size_t> tr_hidden;
  dd_train_options topt;
  dd_train_options_init(&topt);
  bool tr_l2 = false, tr_degenerate = false, tr_quiet = false;
  tr->add_option("--features", tr_features, "Feature store (.demb)")->required()->check(CLI::ExistingFile);
  tr->add_option("--manifest", tr_manifest, "Manifest JSONL")->required()->check(CLI::ExistingFile);
  tr->add_option("--mode", tr_mode, "image or image_text")->check(CLI::IsMember(kModes))->capture_default_str();
  tr->add_option("--seed", tr_seed, "Initialisation and shuffle seed")->required();
  tr->add_option("--out", tr_out, "Output checkpoint (.dmlp)")->required();
  tr->add_option("--hidden", tr_hidden, "Hidden widths, comma separated (default 4096,4096,1024)")
      ->delimiter(',');
  tr->add_option("--lr-start", topt.lr_start, "Initial learning rate")->capture_default_str();
  tr->add_option("--lr-end", topt.lr_end, "Final learning rate")->capture_default_str();
  tr->add_option("--epochs", topt.max_epochs, "Maximum epochs")->capture_default_str();
  tr->add_option("--batch-size", topt.batch_size, "Mini-batch size")->capture_default_str();
  tr->add_option("--patience", topt.early_stop_patience, "Epochs without validation improvement before stopping")
      ->capture_default_str();
  tr->add_flag("--l2-normalize", tr_l2, "L2-normalise features before the MLP");
  tr->add_flag("--include-degenerate", tr_degenerate, "Keep records flagged degenerate");
  tr->add_option("--generator", tr_generator, "Only use generated records of this generator");
  tr->add_option("--history", tr_history, "Write per-epoch CSV log here");
  tr->add_flag("--quiet", tr_quiet, "No progress on stderr");

  // eval
  auto* ev = app.add_subcommand("eval", "Score a checkpoint on the Test split");
  std::string ev_model, ev_features, ev_manifest, ev_out, ev_preds, ev_generator, ev_name = "MLP-Base",
      ev_dataset, ev_backbone, ev_train_generator;
  double ev_threshold = 0.5;
  ev->add_option("--model", ev_model, "Checkpoint (.dmlp)")->required()->check(CLI::ExistingFile);
  ev->add_option("--features", ev_features, "Feature store (.demb)")->required()->check(CLI::ExistingFile);
  ev->add_option("--manifest", ev_manifest, "Manifest JSONL")->required()->check(CLI::ExistingFile);
  ev->add_option("--out", ev_out, "Output EvalReport JSON")->required();
  ev->add_option("--predictions", ev_preds, "Write per-sample predictions JSONL here");
  ev->add_option("--generator", ev_generator, "Test generator (default: every generated record)");
  ev->add_option("--threshold", ev_threshold, "Decision threshold")->capture_default_str();
  ev->add_option("--name", ev_name, "Model name in the report")->capture_default_str();
  ev->add_option("--dataset", ev_dataset, "Dataset tag in the report");
  ev->add_option("--backbone", ev_backbone, "Feature label in the report");
  ev->add_option("--train-generator", ev_train_generator, "Training generator in the report");

  // cross-eval
  auto* cx = app.add_subcommand("cross-eval", "Run an experiment grid (JSON)");
  std::string cx_grid, cx_out;
  uint64_t cx_seed = 0;
  cx->add_option("--grid", cx_grid, "Grid spec JSON")->required()->check(CLI::ExistingFile);
  cx->add_option("--out", cx_out, "Output directory (reports/, tables/)")->required();
  cx->add_option("--seed", cx_seed, "Seed for cells that do not set one")->required();

  // analyze-categories
  auto* ac = app.add_subcommand("analyze-categories", "FN/FP rates per macro category");
  std::string ac_preds, ac_report, ac_out, ac_table;
  double ac_threshold = 0.5;
  ac->add_option("--predictions", ac_preds, "Predictions JSONL from eval")->required()->check(CLI::ExistingFile);
  ac->add_option("--report", ac_report, "EvalReport JSON labelling the table row")->check(CLI::ExistingFile);
  ac->add_option("--threshold", ac_threshold, "Decision threshold")->capture_default_str();
  ac->add_option("--out", ac_out, "Output CategoryErrorReport JSON")->required();
  ac->add_option("--table", ac_table, "Write the Markdown row here instead of stdout");

  // analyze-linguistics
  auto* al = app.add_subcommand("analyze-linguistics", "Correlate caption features with outcomes");
  std::string al_ann, al_preds, al_out, al_target = "correctness", al_name = "MLP-Base", al_generator,
      al_dataset;
  al->add_option("--annotations", al_ann, "Annotations JSONL")->required()->check(CLI::ExistingFile);
  al->add_option("--predictions", al_preds, "Predictions JSONL from eval")->required()->check(CLI::ExistingFile);
  al->add_option("--out", al_out, "Output CorrelationReport JSON")->required();
  al->add_option("--target", al_target, "correctness or prediction")
      ->check(CLI::IsMember({"correctness", "prediction"}))
      ->capture_default_str();
  al->add_option("--name", al_name, "Model name in the report")->capture_default_str();
  al->add_option("--generator", al_generator, "Generator name in the report");
  al->add_option("--dataset", al_dataset, "Dataset tag in the report");

  // plot
  auto* pl = app.add_subcommand("plot", "Render a CorrelationReport as an SVG heatmap");
  std::string pl_report, pl_out;
  pl->add_option("--report", pl_report, "CorrelationReport JSON")->required()->check(CLI::ExistingFile);
  pl->add_option("--out", pl_out, "Output SVG")->required();

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of the backward pass");
  int gc_trials = 100;
  uint64_t gc_seed = 0;
  double gc_eps = 1e-4, gc_tol = 1e-4;
  gc->add_option("--trials", gc_trials, "Random models to check")->check(CLI::PositiveNumber)->capture_default_str();
  gc->add_option("--seed", gc_seed, "Seed for the random models")->capture_default_str();
  gc->add_option("--epsilon", gc_eps, "Central-difference step")->check(CLI::PositiveNumber)->capture_default_str();
  gc->add_option("--tolerance", gc_tol, "Fail above this relative error")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    if (app.get_subcommands().empty()) std::cerr << app.help();
    return kUsage;
  }

  if (bm->parsed()) {
    if (bm_synthetic == !bm_parts.empty()) {
      std::cerr << "build-manifest: give either --synthetic or at least one --part\n";
      return kUsage;
    }
    dd_manifest* m = nullptr;
    dd_status st;
    if (bm_synthetic) {
      dd_protocol_options o;
      dd_protocol_options_init(&o);
      o.train_real = bm_train;
      o.val_real = bm_val;
      o.test_real = bm_test;
      std::vector<const char*> gens;
      for (const auto& g : bm_generators) gens.push_back(g.c_str());
      if (!gens.empty()) {
        o.generators = gens.data();
        o.n_generators = gens.size();
      }
      o.dataset = bm_dataset.c_str();
      o.with_categories = bm_categories;
      st = dd_manifest_synthetic(&o, &m);
    } else {
      std::vector<dd_manifest*> parts;
      st = DD_OK;
      for (const auto& p : bm_parts) {
        dd_manifest* part = nullptr;
        st = dd_manifest_load(p.c_str(), 0, &part);
        if (st != DD_OK) break;
        parts.push_back(part);
      }
      if (st == DD_OK) st = dd_manifest_merge(parts.data(), parts.size(), bm_paired, &m);
      for (auto* p : parts) dd_manifest_free(p);
    }
    if (st == DD_OK && bm_synthetic && bm_paired) {
      dd_manifest* checked = nullptr;
      st = dd_manifest_merge(&m, 1, 1, &checked);
      dd_manifest_free(checked);
    }
    if (st == DD_OK) st = dd_manifest_save(m, bm_out.c_str());
    dd_split_counts c{};
    if (st == DD_OK) st = dd_manifest_split_counts(m, &c);
    dd_manifest_free(m);
    if (st != DD_OK) return report(st);
    std::printf(
        "{\"records\": %zu, \"train\": {\"real\": %zu, \"generated\": %zu}, "
        "\"val\": {\"real\": %zu, \"generated\": %zu}, \"test\": {\"real\": %zu, \"generated\": %zu}}\n",
        c.train_real + c.train_generated + c.val_real + c.val_generated + c.test_real + c.test_generated,
        c.train_real, c.train_generated, c.val_real, c.val_generated, c.test_real, c.test_generated);
    return 0;
  }

  if (ex->parsed()) {
    std::vector<Plant> plants;
    for (const auto& s : ex_plants) {
      auto p = parse_plant(s);
      if (!p) {
        std::cerr << "extract: bad --plant \"" << s << "\"\n";
        return kUsage;
      }
      plants.push_back(*p);
    }
    std::vector<dd_planted_bias> biases;
    for (const auto& p : plants) {
      dd_planted_bias b = p.bias;
      b.generator = p.generator == "*" ? nullptr : p.generator.c_str();
      biases.push_back(b);
    }
    dd_extract_options o;
    dd_extract_options_init(&o);
    o.backbone = ex_backbone.c_str();
    o.mode = ex_mode.c_str();
    o.image_root = ex_root.c_str();
    o.workers = ex_workers;
    o.stub_seed = ex_seed;
    o.biases = biases.data();
    o.n_biases = biases.size();
    o.stub_content_mode = ex_content;
    std::cerr << "extracting " << ex_manifest << " with " << ex_backbone << "\n";
    return report(dd_extract(ex_manifest.c_str(), &o, ex_out.c_str()));
  }

  if (tr->parsed()) {
    topt.mode = tr_mode.c_str();
    topt.seed = tr_seed;
    if (!tr_hidden.empty()) {
      topt.hidden_dims = tr_hidden.data();
      topt.n_hidden = tr_hidden.size();
    }
    topt.l2_normalize = tr_l2;
    topt.include_degenerate = tr_degenerate;
    if (!tr_generator.empty()) topt.generator = tr_generator.c_str();
    if (!tr_history.empty()) topt.history_csv = tr_history.c_str();
    if (!tr_quiet) {
      topt.on_epoch = [](int epoch, double lr, double loss, double acc, double auc, void*) {
        std::fprintf(stderr, "epoch %4d  lr %.5f  loss %.5f  val_acc %.2f  val_auc %.2f\n", epoch, lr,
                     loss, acc, auc);
      };
    }
    return report(dd_train(tr_features.c_str(), tr_manifest.c_str(), &topt, tr_out.c_str()));
  }

  if (ev->parsed()) {
    dd_eval_options o;
    dd_eval_options_init(&o);
    if (!ev_generator.empty()) o.test_generator = ev_generator.c_str();
    o.threshold = ev_threshold;
    o.model_name = ev_name.c_str();
    o.dataset = ev_dataset.c_str();
    o.backbone = ev_backbone.c_str();
    o.train_generator = ev_train_generator.c_str();
    return report(dd_evaluate(ev_model.c_str(), ev_features.c_str(), ev_manifest.c_str(), &o,
                              ev_out.c_str(), ev_preds.empty() ? nullptr : ev_preds.c_str()));
  }

  if (cx->parsed()) {
    std::cerr << "running grid " << cx_grid << "\n";
    return report(dd_run_grid(cx_grid.c_str(), cx_out.c_str(), cx_seed, 1));
  }

  if (ac->parsed()) {
    char* table = nullptr;
    const dd_status st = dd_analyze_categories(ac_preds.c_str(), ac_report.empty() ? nullptr : ac_report.c_str(),
                                               ac_threshold, ac_out.c_str(), &table);
    if (st != DD_OK) return report(st);
    if (ac_table.empty()) {
      print_text(table);
      return 0;
    }
    const std::string text = table ? table : "";
    dd_string_free(table);
    std::FILE* f = std::fopen(ac_table.c_str(), "wb");
    if (!f || std::fwrite(text.data(), 1, text.size(), f) != text.size()) {
      if (f) std::fclose(f);
      std::cerr << "diffdetect: cannot write " << ac_table << "\n";
      return kRuntime;
    }
    std::fclose(f);
    return 0;
  }

  if (al->parsed()) {
    const auto target = al_target == "prediction" ? DD_TARGET_PREDICTION : DD_TARGET_CORRECTNESS;
    return report(dd_analyze_linguistics(al_ann.c_str(), al_preds.c_str(), target, al_name.c_str(),
                                         al_generator.c_str(), al_dataset.c_str(), al_out.c_str()));
  }

  if (pl->parsed()) {
    return report(dd_plot(pl_report.c_str(), pl_out.c_str()));
  }

  if (gc->parsed()) {
    double err = 0;
    size_t checked = 0;
    const dd_status st = dd_gradcheck(gc_trials, gc_seed, gc_eps, &err, &checked);
    if (st != DD_OK) return report(st);
    std::printf("{\"trials\": %d, \"parameters_checked\": %zu, \"max_relative_error\": %.3e, \"pass\": %s}\n",
                gc_trials, checked, err, err <= gc_tol ? "true" : "false");
    return err <= gc_tol ? 0 : kRuntime;
  }
  return kUsage;
}
