#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "viblstm/dataset.hpp"
#include "viblstm/serialize.hpp"

#ifndef VIBLSTM_CLI_PATH
#error "VIBLSTM_CLI_PATH must be defined"
#endif

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(VIBLSTM_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

json slurp_json(const fs::path& path) { return json::parse(slurp(path)); }

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("cli pipeline: train, rerun, prune, eval, bench, inspect") {
  TempDir dir("viblstm_cli_test");
  const std::string synth = "d=8,T=3,a=2,r=2,train=12,val=6";
  const std::string train_flags =
      " --synth " + synth + " --epochs 4 --batch-size 12 --seed 5 --out ";

  REQUIRE(run_cli("train" + train_flags + (dir.path / "run1").string()) == 0);

  SUBCASE("outputs exist and history has one row per epoch") {
    CHECK(fs::exists(dir.path / "run1/model.vibl"));
    CHECK(fs::exists(dir.path / "run1/effective-config.json"));
    const std::string csv = slurp(dir.path / "run1/history.csv");
    const auto rows = std::count(csv.begin(), csv.end(), '\n');
    CHECK(rows == 4 + 1);
  }

  SUBCASE("rerun with the same flags reproduces the model bytes") {
    REQUIRE(run_cli("train" + train_flags + (dir.path / "run2").string()) == 0);
    CHECK(slurp(dir.path / "run1/model.vibl") == slurp(dir.path / "run2/model.vibl"));
  }

  SUBCASE("keep-all prune reports ratio one and negligible deviation") {
    REQUIRE(run_cli("prune --model " + (dir.path / "run1/model.vibl").string() +
                    " --gate-threshold 1e-12 --feature-threshold 1e-12 --out " +
                    (dir.path / "pruned").string()) == 0);
    const json report = slurp_json(dir.path / "pruned/prune-report.json");
    CHECK(report.at("compression_ratio").get<double>() == doctest::Approx(1.0));
    CHECK(report.at("max_equivalence_deviation").get<double>() <= 1e-9);
    // Internal consistency of the reported ratio.
    const double dense = report.at("dense_lstm_parameters").get<double>();
    const double pruned = report.at("pruned_lstm_parameters").get<double>();
    CHECK(report.at("compression_ratio").get<double>() == doctest::Approx(dense / pruned));

    SUBCASE("eval works identically on trainable and compact models") {
      REQUIRE(run_cli("gen --synth d=8,T=3,a=2,r=2,train=10 --seed 5 --out " +
                      (dir.path / "data.seqf").string()) == 0);
      REQUIRE(run_cli("eval --model " + (dir.path / "run1/model.vibl").string() + " --data " +
                      (dir.path / "data.seqf").string() + " --out " +
                      (dir.path / "eval_full").string()) == 0);
      REQUIRE(run_cli("eval --model " + (dir.path / "pruned/model.vibl").string() +
                      " --data " + (dir.path / "data.seqf").string() + " --out " +
                      (dir.path / "eval_compact").string()) == 0);
      const json full = slurp_json(dir.path / "eval_full/eval.json");
      const json compact = slurp_json(dir.path / "eval_compact/eval.json");
      // Keep-all prune deviates by rounding only, so accuracies match.
      CHECK(full.at("accuracy").get<double>() ==
            doctest::Approx(compact.at("accuracy").get<double>()));
    }
  }

  SUBCASE("degenerate prune exits with code four") {
    CHECK(run_cli("prune --model " + (dir.path / "run1/model.vibl").string() +
                  " --gate-threshold 1e12 --out " + (dir.path / "degenerate").string()) == 4);
  }

  SUBCASE("bench with one repeat collapses the quantiles") {
    REQUIRE(run_cli("bench --model " + (dir.path / "run1/model.vibl").string() +
                    " --batch 4 --repeats 1 --out " + (dir.path / "bench").string()) == 0);
    const json bench = slurp_json(dir.path / "bench/bench.json");
    const double median = bench.at("median_us_per_sequence").get<double>();
    CHECK(bench.at("p10_us_per_sequence").get<double>() == median);
    CHECK(bench.at("p90_us_per_sequence").get<double>() == median);
  }

  SUBCASE("inspect writes machine-readable output for both model kinds") {
    REQUIRE(run_cli("inspect --model " + (dir.path / "run1/model.vibl").string() + " --out " +
                    (dir.path / "inspect_full").string()) == 0);
    const json full = slurp_json(dir.path / "inspect_full/inspect.json");
    CHECK(full.at("relevance").contains("feature"));
    // Retained counts are non-increasing across the threshold sweep.
    const json& retained = full.at("relevance").at("i").at("retained");
    CHECK(retained.at("0.001000").get<int>() >= retained.at("1.000000").get<int>());

    REQUIRE(run_cli("prune --model " + (dir.path / "run1/model.vibl").string() +
                    " --gate-threshold 1e-12 --feature-threshold 1e-12 --out " +
                    (dir.path / "pruned2").string()) == 0);
    REQUIRE(run_cli("inspect --model " + (dir.path / "pruned2/model.vibl").string() +
                    " --out " + (dir.path / "inspect_compact").string()) == 0);
    const json compact = slurp_json(dir.path / "inspect_compact/inspect.json");
    CHECK(compact.at("compact").get<bool>());
    CHECK(compact.contains("gate_scales"));
  }
}

TEST_CASE("cli outputs are schema-stable and a fresh model retains everything") {
  TempDir dir("viblstm_cli_schema");
  const std::string synth = " --synth d=8,T=3,a=2,r=2,train=12,val=6 --batch-size 12 --seed 3 ";

  // Zero-epoch training gives the freshly initialized model.
  REQUIRE(run_cli("train" + synth + "--epochs 0 --out " + (dir.path / "fresh").string()) == 0);
  REQUIRE(run_cli("inspect --model " + (dir.path / "fresh/model.vibl").string() + " --out " +
                  (dir.path / "inspect").string()) == 0);
  const json inspect = slurp_json(dir.path / "inspect/inspect.json");

  SUBCASE("fresh masks sit near ratio 100 and all units clear threshold 0.01") {
    for (const char* gate : {"feature", "i", "f", "o", "g"}) {
      const json& retained = inspect.at("relevance").at(gate).at("retained");
      const int units = (std::string(gate) == "feature") ? 8 : 64;
      CHECK(retained.at("0.010000").get<int>() == units);
      CHECK(retained.at("1.000000").get<int>() == units);  // ratios ~100 >> 1
    }
  }

  SUBCASE("json key sets are stable across runs") {
    const auto keys = [](const json& j) {
      std::vector<std::string> v;
      for (auto it = j.begin(); it != j.end(); ++it) v.push_back(it.key());
      return v;
    };
    REQUIRE(run_cli("train" + synth + "--epochs 2 --out " + (dir.path / "a").string()) == 0);
    REQUIRE(run_cli("train" + synth + "--epochs 2 --out " + (dir.path / "b").string()) == 0);
    CHECK(keys(slurp_json(dir.path / "a/effective-config.json")) ==
          keys(slurp_json(dir.path / "b/effective-config.json")));

    const std::string data = (dir.path / "d.seqf").string();
    REQUIRE(run_cli("gen --synth d=8,T=3,a=2,r=2,train=6 --seed 3 --out " + data) == 0);
    for (const char* run : {"ea", "eb"}) {
      REQUIRE(run_cli("eval --model " + (dir.path / "a/model.vibl").string() + " --data " +
                      data + " --out " + (dir.path / run).string()) == 0);
    }
    CHECK(keys(slurp_json(dir.path / "ea/eval.json")) ==
          keys(slurp_json(dir.path / "eb/eval.json")));

    for (const char* run : {"ba", "bb"}) {
      REQUIRE(run_cli("bench --model " + (dir.path / "a/model.vibl").string() +
                      " --batch 2 --repeats 2 --out " + (dir.path / run).string()) == 0);
    }
    CHECK(keys(slurp_json(dir.path / "ba/bench.json")) ==
          keys(slurp_json(dir.path / "bb/bench.json")));

    for (const char* run : {"pa", "pb"}) {
      REQUIRE(run_cli("prune --model " + (dir.path / "a/model.vibl").string() +
                      " --gate-threshold 1e-9 --feature-threshold 1e-9 --out " +
                      (dir.path / run).string()) == 0);
    }
    CHECK(keys(slurp_json(dir.path / "pa/prune-report.json")) ==
          keys(slurp_json(dir.path / "pb/prune-report.json")));
  }

  SUBCASE("history csv is schema-stable") {
    REQUIRE(run_cli("train" + synth + "--epochs 1 --out " + (dir.path / "h1").string()) == 0);
    REQUIRE(run_cli("train" + synth + "--epochs 2 --out " + (dir.path / "h2").string()) == 0);
    const std::string a = slurp(dir.path / "h1/history.csv");
    const std::string b = slurp(dir.path / "h2/history.csv");
    CHECK(a.substr(0, a.find('\n')) == b.substr(0, b.find('\n')));
  }
}

TEST_CASE("cli error paths") {
  TempDir dir("viblstm_cli_errors");

  SUBCASE("config errors exit with code two") {
    CHECK(run_cli("train --out " + (dir.path / "x").string()) == 2);  // no data source
    CHECK(run_cli("eval --model missing.vibl --data missing.seqf") == 2);
    CHECK(run_cli("definitely-not-a-command") == 2);
  }

  SUBCASE("empty dataset is a config error") {
    viblstm::SequenceDataset empty;
    empty.feature_dim = 4;
    empty.seq_len = 2;
    empty.num_classes = 2;
    viblstm::write_seqf(empty, (dir.path / "empty.seqf").string());

    const std::string train_flags = " --synth d=4,T=2,a=2,r=1,train=6,val=3 --epochs 1 "
                                    "--batch-size 6 --seed 1 --out ";
    REQUIRE(run_cli("train" + train_flags + (dir.path / "m").string()) == 0);
    CHECK(run_cli("eval --model " + (dir.path / "m/model.vibl").string() + " --data " +
                  (dir.path / "empty.seqf").string()) == 2);
  }

  SUBCASE("flags override config-file values") {
    std::ofstream cfg(dir.path / "cfg.json");
    cfg << R"({"epochs": 2, "seed": 9, "synth": "d=4,T=2,a=2,r=1,train=6,val=3",)"
        << R"( "batch_size": 6})";
    cfg.close();
    REQUIRE(run_cli("train --config " + (dir.path / "cfg.json").string() + " --epochs 3 --out " +
                    (dir.path / "merged").string()) == 0);
    const json effective = slurp_json(dir.path / "merged/effective-config.json");
    CHECK(effective.at("epochs").get<int>() == 3);   // flag wins
    CHECK(effective.at("seed").get<int>() == 9);     // file fills the gap
    const std::string csv = slurp(dir.path / "merged/history.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3 + 1);
  }
}
