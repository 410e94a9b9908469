// End-to-end exercises of the command-line surface: every subcommand, the
// documented exit codes, determinism/idempotency of outputs, and archive
// interoperability with a stock zip implementation.

#include <catch2/catch_amalgamated.hpp>
#include <cstdlib>
#include <json.hpp>

#include "../support/test_util.hpp"
#include "avmc/archive.hpp"
#include "avmc/metrics.hpp"

#ifndef AVMC_CLI_PATH
#error "AVMC_CLI_PATH must point at the built CLI binary"
#endif

using avmc_test::TempDir;
using nlohmann::json;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string output;  // stdout + stderr
};

RunResult run_cli(const TempDir& tmp, const std::string& args) {
  static int counter = 0;
  const std::string log = tmp.path("cli-log-" + std::to_string(counter++) + ".txt");
  const std::string cmd = std::string(AVMC_CLI_PATH) + " " + args + " > " + log + " 2>&1";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = status < 0 ? -1 : WEXITSTATUS(status);
  r.output = avmc_test::read_file(log);
  return r;
}

bool have_python() {
  static const int status = std::system("python3 -c 'import zipfile' > /dev/null 2>&1");
  return status == 0;
}

std::string small_run_config(const std::string& archive, const std::string& out_dir) {
  json cfg;
  cfg["archive"] = archive;
  cfg["output_dir"] = out_dir;
  cfg["seed"] = 7;
  cfg["model"] = {{"hidden", {{"text", 8}, {"acoustic", 4}, {"visual", 6}}},
                  {"lstm_hidden", 2}};
  cfg["train"] = {{"batch_size", 8}, {"max_epochs", 2}, {"early_stop_patience", 2}};
  return cfg.dump(2);
}

}  // namespace

TEST_CASE("cli end-to-end", "[cli]") {
  TempDir tmp;
  const std::string archive = tmp.path("toy.zip");

  // synth
  auto synth = run_cli(tmp, "synth --out " + archive +
                                " --n-labeled 60 --n-unlabeled 30 --seed 1"
                                " --spec text=6x10 --spec acoustic=12x6 --spec visual=10x5");
  INFO(synth.output);
  REQUIRE(synth.exit_code == 0);
  {
    const avmc::Dataset d = avmc::load_archive(archive);
    REQUIRE(d.instances().size() == 90);
    REQUIRE(d.stats().n_unlabeled == 30);
    REQUIRE(d.specs().text.seq_len == 6);
  }

  SECTION("synth is byte-deterministic under a fixed seed") {
    const std::string again = tmp.path("toy2.zip");
    auto rerun = run_cli(tmp, "synth --out " + again +
                                  " --n-labeled 60 --n-unlabeled 30 --seed 1"
                                  " --spec text=6x10 --spec acoustic=12x6 --spec visual=10x5");
    REQUIRE(rerun.exit_code == 0);
    REQUIRE(avmc_test::read_file(archive) == avmc_test::read_file(again));
  }

  // train (supervised), then rerun for idempotency
  const std::string cfg_path = tmp.path("run.json");
  const std::string out_dir = tmp.path("out");
  avmc_test::write_file(cfg_path, small_run_config(archive, out_dir));

  auto train = run_cli(tmp, "train --config " + cfg_path);
  INFO(train.output);
  REQUIRE(train.exit_code == 0);
  for (const char* name : {"checkpoint.zip", "history.jsonl", "valid_report.json",
                           "run_config.json"}) {
    REQUIRE(std::filesystem::exists(out_dir + "/" + name));
  }
  const std::string ckpt_bytes = avmc_test::read_file(out_dir + "/checkpoint.zip");
  const std::string report_bytes = avmc_test::read_file(out_dir + "/valid_report.json");

  SECTION("retraining with identical inputs overwrites outputs identically") {
    auto again = run_cli(tmp, "train --config " + cfg_path);
    REQUIRE(again.exit_code == 0);
    REQUIRE(avmc_test::read_file(out_dir + "/checkpoint.zip") == ckpt_bytes);
    REQUIRE(avmc_test::read_file(out_dir + "/valid_report.json") == report_bytes);
  }

  SECTION("semi mode and ablation flags are reflected in the resolved config") {
    const std::string semi_dir = tmp.path("out-semi");
    auto semi = run_cli(tmp, "train --config " + cfg_path + " --semi --seed 42 --out " + semi_dir +
                                 " --ablate mixup-a");
    INFO(semi.output);
    REQUIRE(semi.exit_code == 0);
    const json resolved = json::parse(avmc_test::read_file(semi_dir + "/run_config.json"));
    REQUIRE(resolved["train"]["mode"] == "semi");
    REQUIRE(resolved["seed"] == 42);
    REQUIRE(resolved["train"]["ablation"]["disable_mixup_a"] == true);
    REQUIRE(resolved["train"]["ablation"]["disable_mixup_v"] == false);
    // history records phase2 in semi mode
    const std::string history = avmc_test::read_file(semi_dir + "/history.jsonl");
    const json first = json::parse(history.substr(0, history.find('\n')));
    REQUIRE(first.contains("phase2"));
    REQUIRE(!first["phase2"].is_null());
    REQUIRE(first["phase1"].contains("mix"));
  }

  SECTION("dotted --set overrides reach the resolved config") {
    const std::string dir2 = tmp.path("out-set");
    auto r = run_cli(tmp, "train --config " + cfg_path + " --out " + dir2 +
                              " --set train.learning_rate=0.01 --set model.dropout=0.1");
    REQUIRE(r.exit_code == 0);
    const json resolved = json::parse(avmc_test::read_file(dir2 + "/run_config.json"));
    REQUIRE(resolved["train"]["learning_rate"].get<double>() == Catch::Approx(0.01));
    REQUIRE(resolved["model"]["dropout"].get<double>() == Catch::Approx(0.1));
  }

  SECTION("unknown config keys fail with exit 1 naming the key") {
    auto r = run_cli(tmp, "train --config " + cfg_path + " --set train.bogus_key=1");
    REQUIRE(r.exit_code == 1);
    REQUIRE(r.output.find("bogus_key") != std::string::npos);
  }

  SECTION("missing archive fails with exit 2") {
    auto r = run_cli(tmp, "train --config " + cfg_path + " --set archive=" +
                              tmp.path("nope.zip"));
    REQUIRE(r.exit_code == 2);
  }

  // eval
  const std::string ckpt = out_dir + "/checkpoint.zip";
  SECTION("eval writes a schema-complete report per task") {
    const std::string report = tmp.path("report.json");
    auto r = run_cli(tmp, "eval --checkpoint " + ckpt + " --archive " + archive +
                              " --split test --tasks m,t,a,v --label-source multimodal --out " +
                              report);
    INFO(r.output);
    REQUIRE(r.exit_code == 0);
    const json j = json::parse(avmc_test::read_file(report));
    REQUIRE(j["reports"].size() == 4);
    for (const auto& rep : j["reports"]) {
      for (const char* key : {"acc2", "f1", "acc2_weak", "mae", "corr", "r_square"}) {
        REQUIRE(rep.contains(key));
      }
    }
    // one summary line per task
    REQUIRE(r.output.find("task m") != std::string::npos);
    REQUIRE(r.output.find("task v") != std::string::npos);
  }

  SECTION("unimodal label source yields one report per unimodal task") {
    const std::string report = tmp.path("uni.json");
    auto r = run_cli(tmp, "eval --checkpoint " + ckpt + " --archive " + archive +
                              " --split test --tasks t,a,v --label-source unimodal --out " +
                              report);
    REQUIRE(r.exit_code == 0);
    const json j = json::parse(avmc_test::read_file(report));
    REQUIRE(j["reports"].size() == 3);
    REQUIRE(j["label_source"] == "unimodal");
  }

  SECTION("nonexistent split fails without partial output") {
    const std::string report = tmp.path("never.json");
    auto r = run_cli(tmp, "eval --checkpoint " + ckpt + " --archive " + archive +
                              " --split nope --out " + report);
    REQUIRE(r.exit_code == 2);
    REQUIRE_FALSE(std::filesystem::exists(report));
  }

  SECTION("feature-spec mismatch names the modality") {
    const std::string other = tmp.path("other.zip");
    REQUIRE(run_cli(tmp, "synth --out " + other +
                             " --n-labeled 20 --n-unlabeled 0 --seed 2 --spec text=5x9")
                .exit_code == 0);
    auto r = run_cli(tmp, "eval --checkpoint " + ckpt + " --archive " + other + " --split test");
    REQUIRE(r.exit_code == 2);
    REQUIRE(r.output.find("text") != std::string::npos);
  }

  // predict
  SECTION("predict emits one CSV row per instance") {
    const std::string csv_path = tmp.path("preds.csv");
    auto r = run_cli(tmp, "predict --checkpoint " + ckpt + " --archive " + archive +
                              " --split test --task m --out " + csv_path);
    REQUIRE(r.exit_code == 0);
    std::istringstream in(avmc_test::read_file(csv_path));
    const auto records = avmc::predictions_from_csv(in);
    const avmc::Dataset d = avmc::load_archive(archive);
    REQUIRE(records.size() == static_cast<std::size_t>(d.stats().n_test));
  }

  // aggregate
  SECTION("aggregate maps seven-score rows to grid labels") {
    const std::string scores = tmp.path("scores.csv");
    avmc_test::write_file(scores, "x,0,0,0,0,0,0,0\ny,3,3,3,3,3,3,3\nz,2,2,2,2,2,1,3\n");
    const std::string labels = tmp.path("labels.csv");
    auto r = run_cli(tmp, "aggregate --in " + scores + " --out " + labels);
    REQUIRE(r.exit_code == 0);
    REQUIRE(avmc_test::read_file(labels) == "x,0.0\ny,1.0\nz,0.6\n");
  }

  SECTION("malformed aggregate rows report the row number") {
    const std::string scores = tmp.path("bad-scores.csv");
    avmc_test::write_file(scores, "x,0,0,0,0,0,0,0\ny,1,2\n");
    auto r = run_cli(tmp, "aggregate --in " + scores + " --out " + tmp.path("na.csv"));
    REQUIRE(r.exit_code == 2);
    REQUIRE(r.output.find("row 2") != std::string::npos);
    REQUIRE_FALSE(std::filesystem::exists(tmp.path("na.csv")));
  }

  SECTION("usage errors exit with code 1") {
    auto r = run_cli(tmp, "train");  // missing --config
    REQUIRE(r.exit_code == 1);
    auto unknown = run_cli(tmp, "frobnicate");
    REQUIRE(unknown.exit_code == 1);
  }

  // interop with a stock zip implementation
  SECTION("archives interoperate with an external zip implementation") {
    if (!have_python()) {
      SKIP("python3 unavailable");
    }
    // Stock reader accepts our archive.
    const std::string check =
        "python3 -c \"import zipfile,sys; z=zipfile.ZipFile('" + archive +
        "'); sys.exit(0 if z.testzip() is None else 1)\"";
    REQUIRE(std::system(check.c_str()) == 0);

    // We accept a deflated re-pack produced by the stock writer.
    const std::string repacked = tmp.path("repacked.zip");
    const std::string script = tmp.path("repack.py");
    avmc_test::write_file(script,
                          "import zipfile\n"
                          "src = zipfile.ZipFile('" + archive + "')\n"
                          "dst = zipfile.ZipFile('" + repacked + "', 'w', zipfile.ZIP_DEFLATED)\n"
                          "for n in src.namelist():\n"
                          "    dst.writestr(n, src.read(n))\n"
                          "dst.close()\n");
    REQUIRE(std::system(("python3 " + script).c_str()) == 0);
    const avmc::Dataset d1 = avmc::load_archive(archive);
    const avmc::Dataset d2 = avmc::load_archive(repacked);
    REQUIRE(d1.instances().size() == d2.instances().size());
    for (std::size_t i = 0; i < d1.instances().size(); ++i) {
      REQUIRE(d1.instances()[i].feature(avmc::Modality::text).values() ==
              d2.instances()[i].feature(avmc::Modality::text).values());
    }
  }
}
