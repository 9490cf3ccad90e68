// One PASS/FAIL line per primary criterion. Exit status is the number of failures.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "common/error.hpp"
#include "corpus/manifest.hpp"
#include "experiments/grid.hpp"
#include "experiments/render.hpp"
#include "metrics/metrics.hpp"
#include "trainer/mlp.hpp"
#include "trainer/train.hpp"
#include "../unit/stub_corpus.hpp"
#include "../unit/test_util.hpp"

using namespace diffdetect;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(const std::string& name, double limit_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (limit_s > 0 && secs >= limit_s) {
    o.pass = false;
    o.detail += " (over the " + std::to_string(static_cast<int>(limit_s)) + " s limit)";
  }
  if (!o.pass) ++failures;
  std::printf("%s  %-34s %7.2fs  %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), secs, o.detail.c_str());
  std::fflush(stdout);
}

int sh(const std::string& args) {
  const int status = std::system((std::string(DD_CLI) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string q(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

std::string fmt(const char* f, double a, double b = 0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

Outcome gradient_check() {
  const auto r = trainer::random_gradient_check(50, 20240611, 1e-4);
  return {r.models == 50 && r.max_relative_error < 1e-4,
          fmt("50 models, max rel err %.3g over %.0f params", r.max_relative_error,
              static_cast<double>(r.parameters_checked))};
}

Outcome auc_oracle() {
  std::mt19937_64 g(7);
  int mismatches = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 2 + g() % 199;
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (auto& v : s) v = static_cast<double>(g() % 25) / 25.0;
    for (auto& v : y) v = static_cast<int>(g() % 2);
    y[0] = 0;
    y[1] = 1;
    std::uint64_t wins_x2 = 0, pos = 0, neg = 0;
    for (std::size_t i = 0; i < n; ++i) (y[i] ? pos : neg) += 1;
    for (std::size_t i = 0; i < n; ++i) {
      if (!y[i]) continue;
      for (std::size_t j = 0; j < n; ++j) {
        if (y[j]) continue;
        wins_x2 += s[i] > s[j] ? 2 : (s[i] == s[j] ? 1 : 0);
      }
    }
    const double brute = 100.0 * static_cast<double>(wins_x2) /
                         (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
    if (metrics::roc_auc(s, y) != brute) ++mismatches;
  }
  return {mismatches == 0, fmt("1000 instances with ties, %.0f mismatches", mismatches)};
}

Outcome pearson_oracle() {
  std::mt19937_64 g(13);
  std::normal_distribution<double> nd;
  double worst = 0;
  bool props = true;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 2 + g() % 199;
    std::vector<double> x(n), y(n), lin(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = nd(g);
      y[i] = 0.3 * x[i] + nd(g);
    }
    // Raw-moment form in extended precision.
    long double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
      sx += x[i];
      sy += y[i];
      sxx += static_cast<long double>(x[i]) * x[i];
      syy += static_cast<long double>(y[i]) * y[i];
      sxy += static_cast<long double>(x[i]) * y[i];
    }
    const long double nn = static_cast<long double>(n);
    const long double oracle =
        (nn * sxy - sx * sy) / std::sqrt((nn * sxx - sx * sx) * (nn * syy - sy * sy));
    const double r = metrics::pearson(x, y);
    worst = std::max(worst, static_cast<double>(std::fabs(static_cast<long double>(r) - oracle)));
    const double b = (t % 2 ? 2.5 : -0.7);
    for (std::size_t i = 0; i < n; ++i) lin[i] = 1.0 + b * x[i];
    props = props && r == metrics::pearson(y, x) && std::fabs(r) <= 1.0 + 1e-12 &&
            std::fabs(metrics::pearson(x, lin) - (b > 0 ? 1.0 : -1.0)) < 1e-12;
  }
  return {worst < 1e-12 && props,
          fmt("max |r - oracle| %.3g, symmetry/affine-sign ", worst) + (props ? "hold" : "BROKEN")};
}

struct Pipeline {
  testutil::TempDir dir;
  bool ok = false;
  std::string why;
};

Pipeline& pipeline() {
  static Pipeline p;
  return p;
}

std::string train_args(const Pipeline& p, const std::string& out) {
  return "train --quiet --features " + q(p.dir / "f.demb") + " --manifest " + q(p.dir / "m.jsonl") +
         " --seed 1 --hidden 256,128 --batch-size 32 --out " + q(p.dir / out);
}

std::string eval_args(const Pipeline& p, const std::string& model, const std::string& out) {
  return "eval --model " + q(p.dir / model) + " --features " + q(p.dir / "f.demb") + " --manifest " +
         q(p.dir / "m.jsonl") + " --generator stable_diffusion --dataset mscoco --backbone stub --out " +
         q(p.dir / out);
}

Outcome separability() {
  auto& p = pipeline();
  // 200/100/100 real plus one SD sibling each: 800 samples.
  if (sh("build-manifest --synthetic --train-real 200 --val-real 100 --test-real 100 "
         "--generator stable_diffusion --out " + q(p.dir / "m.jsonl")) != 0)
    return {false, "build-manifest failed"};
  if (sh("extract --backbone stub --stub-seed 0 --plant '*:0:0.5' --manifest " + q(p.dir / "m.jsonl") +
         " --out " + q(p.dir / "f.demb")) != 0)
    return {false, "extract failed"};
  if (sh(train_args(p, "a.dmlp")) != 0) return {false, "train failed"};
  if (sh(eval_args(p, "a.dmlp", "r1.json")) != 0) return {false, "eval failed"};
  const auto r = metrics::eval_report_from_json(nlohmann::json::parse(testutil::slurp(p.dir / "r1.json")));
  p.ok = true;
  const bool size_ok = corpus::parse_manifest(p.dir / "m.jsonl").records.size() == 800;
  return {size_ok && r.accuracy >= 95.0 && r.auc >= 99.0,
          fmt("800 samples, test accuracy %.1f, AUC %.1f", r.accuracy, r.auc)};
}

Outcome cross_mechanism() {
  testutil::TempDir dir;
  using corpus::Generator;
  const auto c = testutil::write_stub_corpus(
      dir.path(), 200, 50, 100, {{Generator::stable_diffusion(), 0, 0.5f}, {Generator::glide(), 1, 0.5f}}, 2);
  const auto m = experiments::run_cross({testutil::stub_spec(c, "sd", Generator::stable_diffusion(), 3),
                                         testutil::stub_spec(c, "gl", Generator::glide(), 3)});
  bool ok = m.cells.size() == 4;
  std::string detail;
  for (const auto& [key, ev] : m.cells) {
    const double auc = ev.report.auc;
    ok = ok && (key.first == key.second ? auc >= 99.0 : std::fabs(auc - 50.0) <= 10.0);
    detail += (key.first == "stable_diffusion" ? "SD" : "GL") + std::string(">") +
              (key.second == "stable_diffusion" ? "SD" : "GL") + fmt(" %.1f  ", auc);
  }
  return {ok, "AUC " + detail};
}

Outcome determinism() {
  auto& p = pipeline();
  if (!p.ok) return {false, "separability pipeline did not run"};
  if (sh(train_args(p, "b.dmlp")) != 0) return {false, "second train failed"};
  if (sh(eval_args(p, "b.dmlp", "r2.json")) != 0) return {false, "second eval failed"};
  const bool ckpt = testutil::slurp(p.dir / "a.dmlp") == testutil::slurp(p.dir / "b.dmlp");
  const bool rep = testutil::slurp(p.dir / "r1.json") == testutil::slurp(p.dir / "r2.json");
  return {ckpt && rep, std::string("checkpoints ") + (ckpt ? "identical" : "DIFFER") + ", reports " +
                           (rep ? "identical" : "DIFFER")};
}

Outcome param_budget() {
  trainer::MlpConfig c;
  c.input_dim = 512;
  const auto n = trainer::param_count(c);
  const double rel = std::fabs(static_cast<double>(n) - 23e6) / 23e6;
  return {n == 23078913u && rel <= 0.02, fmt("%.0f parameters, %.2f%% from 23M", static_cast<double>(n), 100 * rel)};
}

Outcome table_rendering() {
  const auto row = [](std::string model, std::string features, double acc, double auc) {
    metrics::EvalReport r;
    r.cell.model = std::move(model);
    r.cell.dataset = "mscoco";
    r.cell.mode = "image";
    r.cell.features = std::move(features);
    r.accuracy = acc;
    r.auc = auc;
    return r;
  };
  const std::vector<metrics::EvalReport> rows{row("MLP-Base", "clip-vit", 79.5, 88.8),
                                              row("Resnet50", "Resnet50", 97.1, 99.6)};
  using experiments::TableFormat;
  using experiments::TableLayout;
  const bool md = experiments::render_tables(rows, TableFormat::kMarkdown, TableLayout::kIntra) ==
                  testutil::slurp(testutil::fixture("golden/intra_table.md"));
  const bool csv = experiments::render_tables(rows, TableFormat::kCsv, TableLayout::kIntra) ==
                   testutil::slurp(testutil::fixture("golden/intra_table.csv"));
  return {md && csv, std::string("markdown ") + (md ? "matches" : "DIFFERS") + ", csv " +
                         (csv ? "matches" : "DIFFERS")};
}

Outcome category_analysis() {
  // animate: 6 generated (2 missed), 4 real (1 false alarm)
  // inanimate: 5 generated (1 missed), 5 real (2 false alarms, one exactly at 0.5)
  const std::vector<double> s{0.9, 0.8, 0.3, 0.7, 0.1, 0.6, 0.2, 0.55, 0.4, 0.1,
                              0.95, 0.5, 0.45, 0.85, 0.65, 0.3, 0.7, 0.5, 0.2, 0.05};
  const std::vector<int> y{1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0};
  std::vector<std::string> c(20, "inanimate");
  std::fill(c.begin(), c.begin() + 10, "animate");
  const auto r = metrics::category_error_rates(s, y, c);
  const auto& a = r.buckets.at("animate");
  const auto& i = r.buckets.at("inanimate");
  metrics::ConfusionCounts sum;
  for (const auto& [_, b] : r.buckets) sum += b.counts;
  const bool rates = a.fn_pct == 100.0 * 2 / 6 && a.fp_pct == 25.0 && i.fn_pct == 20.0 && i.fp_pct == 40.0;
  const bool global = r.global == metrics::ConfusionCounts{8, 3, 6, 3} && sum == r.global;
  return {rates && global && r.buckets.size() == 2,
          fmt("animate FN %.2f FP %.1f, ", *a.fn_pct, *a.fp_pct) +
              fmt("inanimate FN %.1f FP %.1f, buckets sum to global ", *i.fn_pct, *i.fp_pct) +
              (global ? "yes" : "NO")};
}

}  // namespace

int main() {
  criterion("gradient correctness", 30, gradient_check);
  criterion("AUC oracle equivalence", 10, auc_oracle);
  criterion("Pearson oracle equivalence", 0, pearson_oracle);
  criterion("separability end-to-end", 120, separability);
  criterion("cross-generalization mechanism", 0, cross_mechanism);
  criterion("determinism", 0, determinism);
  criterion("parameter budget", 0, param_budget);
  criterion("table rendering", 0, table_rendering);
  criterion("category analysis", 0, category_analysis);
  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
