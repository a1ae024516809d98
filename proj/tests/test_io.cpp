#include <zlib.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <unistd.h>

#include "doctest.h"
#include "json.hpp"
#include "nrl/error.hpp"
#include "nrl/io.hpp"
#include "nrl/runner.hpp"

using namespace nrl;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("nrl_test_io_" + std::to_string(::getpid())) / name;
  fs::create_directories(p.parent_path());
  return p;
}

void write_text(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

Trajectory sample_trajectory() {
  SamplingPlan plan;
  const auto data = make_dataset(example_target(), plan, 0);
  RngStream rng(1, Stream::kInit);
  TrainConfig cfg;
  cfg.max_iters = 300;
  cfg.record_stride = 7;
  return train(init_params(2, 2, 1e-2, rng), data, Activation::tanh(), cfg);
}

const char* kMinimal = R"({"experiments": [{"id": "x", "kind": "ratio_sweep", "init": {"scale": 1e-20}}]})";

}  // namespace

TEST_CASE("format_double round-trips") {
  for (double v : {0.1, 1e-20, -3.5e300, 5e-324, 1.0 / 3.0, 6.0}) CHECK(std::strtod(format_double(v).c_str(), nullptr) == v);
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1e-20) == "1e-20");
  CHECK(format_double(std::nan("")) == "nan");
  CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(format_double(-std::numeric_limits<double>::infinity()) == "-inf");
}

TEST_CASE("csv quoting") {
  CsvTable t;
  t.header = {"a", "b"};
  t.rows = {{"plain", "has,comma"}, {"has\"quote", ""}};
  CHECK(t.str() == "a,b\nplain,\"has,comma\"\n\"has\"\"quote\",\n");
}

TEST_CASE("sweep table schema is fixed") {
  const auto t = sweep_table({});
  CHECK(t.str() ==
        "config_id,n,data_seed,init_seed,grid_index,scale,c_tilde,c_ratio,gen_error,gen_rmse,branch,q1_distance,"
        "q2_distance,recovered,stop_reason,final_loss,iters_used,error\n");
  SweepResult r;
  r.config_id = "c";
  r.error = "bad cell";
  const auto row = sweep_table({r}).rows.at(0);
  CHECK(row.at(14) == "error");
  CHECK(row.at(17) == "bad cell");
}

TEST_CASE("atomic write replaces the file and leaves no temporaries") {
  const auto p = scratch("atomic.txt");
  write_file_atomic(p.string(), "first");
  write_file_atomic(p.string(), "second");
  CHECK(read_file(p.string()) == "second");
  std::size_t entries = 0;
  for (const auto& e : fs::directory_iterator(p.parent_path()))
    if (e.path().filename().string().rfind("atomic.txt", 0) == 0) ++entries;
  CHECK(entries == 1);
  CHECK_THROWS_AS(read_file((p.parent_path() / "missing").string()), Error);
}

TEST_CASE("trajectory round trip, plain and gzip") {
  const auto tr = sample_trajectory();
  for (const char* name : {"t.ndjson", "t.ndjson.gz"}) {
    const auto p = scratch(name);
    save_trajectory(tr, p.string());
    const auto back = load_trajectory(p.string(), 2);
    REQUIRE(back.snapshots.size() == tr.snapshots.size());
    for (std::size_t k = 0; k < tr.snapshots.size(); ++k) {
      CHECK(back.snapshots[k].iter == tr.snapshots[k].iter);
      CHECK(back.snapshots[k].theta == tr.snapshots[k].theta);
      CHECK(back.snapshots[k].loss == tr.snapshots[k].loss);
    }
    CHECK(back.terminal.theta == tr.terminal.theta);
    CHECK(back.terminal.iter == tr.terminal.iter);
    CHECK(back.stop_reason == tr.stop_reason);
    CHECK(back.stride == tr.stride);
  }
  gzFile f = gzopen(scratch("t.ndjson.gz").string().c_str(), "rb");
  REQUIRE(f != nullptr);
  char buf[16] = {};
  CHECK(gzread(f, buf, 8) == 8);
  gzclose(f);
  CHECK(std::string(buf).rfind("{\"", 0) == 0);
}

TEST_CASE("malformed trajectories name the offending line") {
  const auto p = scratch("bad.ndjson");
  write_text(p, "{\"iter\":0,\"loss\":1.0,\"theta\":[0,0,0,0,0,0]}\n{\"iter\":1,\"loss\":1.0}\n");
  try {
    load_trajectory(p.string(), 2);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kIo);
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
  }
  write_text(p, "not json\n");
  CHECK_THROWS_AS(load_trajectory(p.string(), 2), Error);
  write_text(p, "{\"iter\":0,\"loss\":1.0,\"theta\":[0,0,0,0,0]}\n");
  CHECK_THROWS_AS(load_trajectory(p.string(), 2), Error);
  write_text(p, "");
  CHECK_THROWS_AS(load_trajectory(p.string(), 2), Error);
}

TEST_CASE("a file without a stop record infers divergence from non-finite values") {
  const auto p = scratch("div.ndjson");
  write_text(p, "{\"iter\":0,\"loss\":1.0,\"theta\":[0,0,0,0,0,0]}\n{\"iter\":5,\"loss\":null,\"theta\":[null,0,0,0,0,0]}\n");
  const auto t = load_trajectory(p.string(), 2);
  CHECK(t.stop_reason == StopReason::kDivergence);
  CHECK(std::isnan(t.terminal.loss));
}

TEST_CASE("config parsing") {
  const auto cfg = parse_run_config(kMinimal);
  REQUIRE(cfg.experiments.size() == 1);
  CHECK(cfg.experiments[0].scales == std::vector<double>{1e-20});
  CHECK(cfg.experiments[0].kind == ExperimentKind::kRatioSweep);

  const auto ranged = parse_experiment(
      R"({"id": "r", "kind": "scale_sweep", "init": {"seeds": {"from": 2, "to": 5}}, "train": {"max_iters": 1e3}})");
  CHECK(ranged.init_seeds == std::vector<std::uint64_t>{2, 3, 4});
  CHECK(ranged.train.max_iters == 1000);
}

TEST_CASE("paper_scale overrides apply only on request") {
  const char* text = R"({"experiments": [{"id": "p", "kind": "scale_sweep",
      "train": {"max_iters": 100, "learning_rate": 0.5},
      "paper_scale": {"train": {"max_iters": 1000000}}}]})";
  CHECK(parse_run_config(text, false).experiments[0].train.max_iters == 100);
  const auto big = parse_run_config(text, true).experiments[0];
  CHECK(big.train.max_iters == 1000000);
  CHECK(big.train.learning_rate == 0.5);
}

TEST_CASE("config errors carry location") {
  auto message = [](const std::string& text) {
    try {
      parse_run_config(text);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kConfig);
      return std::string(e.what());
    }
    FAIL("expected a config error");
    return std::string();
  };
  CHECK(message(R"({"experiments": []})").find("empty") != std::string::npos);
  CHECK(message("{\n\"experiments\": [\n{\"id\": 1,,}]}").find("line 3") != std::string::npos);
  const auto unknown = message(R"({"experiments": [{"id": "u", "kind": "scale_sweep", "train": {"lr": 1}}]})");
  CHECK(unknown.find("train.lr") != std::string::npos);
  CHECK(unknown.find("(u)") != std::string::npos);
  CHECK(message(R"({"experiments": [{"id": "k", "kind": "nope"}]})").find("kind") != std::string::npos);
  CHECK(message(R"({"experiments": [{"id": "d", "kind": "scale_sweep"}, {"id": "d", "kind": "scale_sweep"}]})")
            .find("duplicate") != std::string::npos);
  CHECK(message(R"({"experiments": [{"id": "n", "kind": "scale_sweep", "init": {"scales": [-1]}}]})")
            .find("scales") != std::string::npos);
  CHECK_THROWS_AS(load_run_config(scratch("missing.json").string()), Error);
}

TEST_CASE("run_experiments writes CSVs and a manifest") {
  const auto dir = scratch("run_out");
  fs::remove_all(dir);
  const auto cfg = parse_run_config(R"({"experiments": [{"id": "mini", "kind": "ratio_sweep",
      "sampling": {"n_values": [2, 3]}, "init": {"scale": 1e-20}, "ratio_grid_points": 3,
      "train": {"max_iters": 200, "learning_rate": 0.1}, "split_by_n": true}]})");
  std::vector<std::string> lines;
  const auto rep = run_experiments(cfg, "inline", dir.string(), {1, 0}, [&](const std::string& l) { lines.push_back(l); });
  CHECK_FALSE(rep.any_error());
  CHECK_FALSE(lines.empty());
  for (const char* f : {"mini_n2.csv", "mini_n3.csv", "mini_branch.csv", "manifest.json"})
    CHECK(fs::exists(dir / f));
  const auto m = nlohmann::json::parse(read_file((dir / "manifest.json").string()));
  CHECK(m["config_path"] == "inline");
  CHECK(m["experiments"][0]["status"] == "ok");
  CHECK(m["experiments"][0]["files"].size() == 3);
  CHECK(m.contains("started_at"));
  CHECK(m.contains("artifact_version"));

  const std::string first = read_file((dir / "mini_n3.csv").string());
  run_experiments(cfg, "inline", dir.string(), {2, 0});
  CHECK(read_file((dir / "mini_n3.csv").string()) == first);
}
