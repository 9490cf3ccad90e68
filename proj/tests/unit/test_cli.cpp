#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <string>

#include "test_util.hpp"

namespace {

struct CliRun {
  int code = -1;
  std::string out;
};

// stdout only; stderr goes to err_file when given, else is discarded.
CliRun cli(const std::string& args, const std::filesystem::path& err_file = {}) {
  const std::string redirect = err_file.empty() ? " 2>/dev/null" : " 2>" + err_file.string();
  const std::string cmd = std::string(DD_CLI) + " " + args + redirect;
  CliRun r;
  FILE* p = ::popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = ::pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string q(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST(Cli, ExitCodes) {
  testutil::TempDir tmp;
  EXPECT_EQ(cli("--help").code, 0);
  EXPECT_NE(cli("--help").out.find("cross-eval"), std::string::npos);
  EXPECT_EQ(cli("--version").code, 0);
  EXPECT_EQ(cli("train --help").code, 0);
  EXPECT_EQ(cli("").code, 1);
  EXPECT_EQ(cli("frobnicate").code, 1);
  EXPECT_EQ(cli("extract --backbone stub --out x").code, 1);  // --manifest missing
  EXPECT_EQ(cli("extract --manifest /nonexistent --backbone stub --out x").code, 1);
  EXPECT_EQ(cli("gradcheck --trials 0").code, 1);

  testutil::spit(tmp / "bad.jsonl", "{not json}\n");
  const CliRun bad = cli("build-manifest --part " + q(tmp / "bad.jsonl") + " --out " + q(tmp / "o.jsonl"),
                      tmp / "err.txt");
  EXPECT_EQ(bad.code, 2);
  const auto err = testutil::slurp(tmp / "err.txt");
  EXPECT_EQ(err.rfind("diffdetect: ", 0), 0u) << err;
  EXPECT_NE(err.find("line 1"), std::string::npos) << err;
  EXPECT_FALSE(std::filesystem::exists(tmp / "o.jsonl"));
}

TEST(Cli, Gradcheck) {
  const CliRun r = cli("gradcheck --trials 10 --seed 3");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("max_relative_error"), std::string::npos) << r.out;
  EXPECT_EQ(cli("gradcheck --trials 5 --tolerance 0").code, 2);
}

TEST(Cli, Pipeline) {
  testutil::TempDir tmp;
  const CliRun bm = cli("build-manifest --synthetic --train-real 120 --val-real 40 --test-real 40 "
                     "--generator stable_diffusion --generator glide --categories --out " +
                     q(tmp / "m.jsonl"));
  ASSERT_EQ(bm.code, 0);
  EXPECT_NE(bm.out.find("\"train\": {\"real\": 120, \"generated\": 240}"), std::string::npos) << bm.out;

  ASSERT_EQ(cli("extract --manifest " + q(tmp / "m.jsonl") + " --backbone stub --plant '*:0:0.5' --out " +
                q(tmp / "f.demb"))
                .code,
            0);
  EXPECT_EQ(testutil::slurp(tmp / "f.demb").substr(0, 4), "DEMB");

  const std::string train = "train --quiet --features " + q(tmp / "f.demb") + " --manifest " +
                            q(tmp / "m.jsonl") +
                            " --seed 7 --hidden 32 --batch-size 16 --epochs 60 --generator stable_diffusion";
  ASSERT_EQ(cli(train + " --out " + q(tmp / "a.dmlp") + " --history " + q(tmp / "h.csv")).code, 0);
  ASSERT_EQ(cli(train + " --out " + q(tmp / "b.dmlp")).code, 0);
  EXPECT_EQ(testutil::slurp(tmp / "a.dmlp"), testutil::slurp(tmp / "b.dmlp"));
  EXPECT_EQ(testutil::slurp(tmp / "h.csv").rfind("epoch,lr,train_loss,val_acc,val_auc\n", 0), 0u);
  EXPECT_EQ(cli("train --features " + q(tmp / "f.demb") + " --manifest " + q(tmp / "m.jsonl") +
                " --out " + q(tmp / "c.dmlp"))
                .code,
            1);  // --seed is required

  const std::string eval = "eval --model " + q(tmp / "a.dmlp") + " --features " + q(tmp / "f.demb") +
                           " --manifest " + q(tmp / "m.jsonl") +
                           " --generator stable_diffusion --dataset mscoco --backbone stub";
  ASSERT_EQ(cli(eval + " --out " + q(tmp / "r.json") + " --predictions " + q(tmp / "p.jsonl")).code, 0);
  ASSERT_EQ(cli(eval + " --out " + q(tmp / "r2.json")).code, 0);
  EXPECT_EQ(testutil::slurp(tmp / "r.json"), testutil::slurp(tmp / "r2.json"));
  EXPECT_NE(testutil::slurp(tmp / "r.json").find("\"auc\": 100.0"), std::string::npos);

  const CliRun cat = cli("analyze-categories --predictions " + q(tmp / "p.jsonl") + " --report " +
                      q(tmp / "r.json") + " --out " + q(tmp / "c.json"));
  EXPECT_EQ(cat.code, 0);
  EXPECT_NE(cat.out.find("| MLP-Base | Image-Only | STUB | Stable Diffusion |"), std::string::npos) << cat.out;
}

TEST(Cli, CrossEvalWritesFourReports) {
  testutil::TempDir tmp;
  ASSERT_EQ(cli("build-manifest --synthetic --train-real 100 --val-real 30 --test-real 30 "
                "--generator stable_diffusion --generator glide --out " + q(tmp / "m.jsonl"))
                .code,
            0);
  ASSERT_EQ(cli("extract --manifest " + q(tmp / "m.jsonl") +
                " --backbone stub --plant stable_diffusion:0:0.5 --plant glide:1:0.5 --out " +
                q(tmp / "f.demb"))
                .code,
            0);
  const std::string mlp = R"("mlp": {"hidden_dims": [32], "batch_size": 16, "max_epochs": 30})";
  const auto cell = [&](const std::string& name, const std::string& gen) {
    return R"({"name": ")" + name + R"(", "dataset": "mscoco", "train_generator": ")" + gen +
           R"(", "test_generators": ["stable_diffusion", "glide"], "mode": "image", "backbone": "stub",
            "manifest": "m.jsonl", "features": "f.demb", )" + mlp + "}";
  };
  testutil::spit(tmp / "grid.json",
                 "{\"cells\": [" + cell("sd", "stable_diffusion") + ", " + cell("gl", "glide") + "]}");
  EXPECT_EQ(cli("cross-eval --grid " + q(tmp / "grid.json") + " --out " + q(tmp / "out")).code, 1);
  ASSERT_EQ(cli("cross-eval --seed 1 --grid " + q(tmp / "grid.json") + " --out " + q(tmp / "out")).code, 0);
  int reports = 0;
  for (const auto& e : std::filesystem::directory_iterator(tmp / "out/reports")) {
    const auto name = e.path().filename().string();
    if (name.size() > 5 && name.ends_with(".json") && !name.ends_with(".categories.json")) ++reports;
  }
  EXPECT_EQ(reports, 4);
  const auto cross = testutil::slurp(tmp / "out/tables/cross.md");
  EXPECT_EQ(std::count(cross.begin(), cross.end(), '\n'), 6);
  EXPECT_NE(cross.find("| Stable Diffusion | GLIDE |"), std::string::npos) << cross;
}
