#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "nrl/experiments.hpp"
#include "nrl/io.hpp"

namespace fs = std::filesystem;
using namespace nrl;

namespace {

struct Result {
  int code = -1;
  std::string output;
};

Result sh(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + NRL_CLI_PATH + " " + args + " 2>&1";
  Result r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  char buf[4096];
  std::size_t got;
  while ((got = fread(buf, 1, sizeof buf, p)) > 0) r.output.append(buf, got);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path work(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("nrl_cli_" + std::to_string(::getpid())) / name;
  fs::create_directories(p.parent_path());
  return p;
}

fs::path write_config(const std::string& name, const std::string& text) {
  const auto p = work(name);
  std::ofstream(p) << text;
  return p;
}

const char* kSmallFig5 = R"({"experiments": [{"id": "fig5", "kind": "ratio_sweep",
  "sampling": {"kind": "gaussian", "n_values": [2, 3, 4, 5, 6], "data_seeds": [0, 1]},
  "init": {"scale": 1e-20}, "ratio_grid_points": 3,
  "train": {"learning_rate": 0.1, "max_iters": 300}, "split_by_n": true}]})";

std::string save(const Trajectory& t, const std::string& name) {
  const auto p = work(name);
  save_trajectory(t, p.string());
  return p.string();
}

Snapshot snap(std::int64_t iter, Vec flat, double loss) { return {iter, NetworkParams(2, 2, std::move(flat)), loss}; }

}  // namespace

TEST_CASE("verify exit codes") {
  const auto ok = sh("verify");
  CHECK(ok.code == 0);
  CHECK(ok.output.find("FAIL") == std::string::npos);
  CHECK(ok.output.find("PASS gradient-vs-finite-differences") != std::string::npos);
  const auto bad = sh("verify --inject-fault gradient-sign");
  CHECK(bad.code != 0);
  CHECK(bad.output.find("FAIL gradient-vs-finite-differences") != std::string::npos);
}

TEST_CASE("usage errors exit 2") {
  CHECK(sh("").code == 2);
  CHECK(sh("run").code == 2);
  CHECK(sh("bogus").code == 2);
}

TEST_CASE("config errors exit 2 with a diagnostic") {
  const auto empty = sh("run " + write_config("empty.json", R"({"experiments": []})").string() + " --out " +
                        work("o_empty").string());
  CHECK(empty.code == 2);
  CHECK(empty.output.find("empty") != std::string::npos);

  const auto syntax =
      sh("run " + write_config("syntax.json", "{\n  \"experiments\": [\n    {,}\n]}").string() + " --out " +
         work("o_syntax").string());
  CHECK(syntax.code == 2);
  CHECK(syntax.output.find("line 3") != std::string::npos);

  const auto field = sh("run " +
                        write_config("field.json", R"({"experiments": [{"id": "f", "kind": "scale_sweep",
                            "train": {"learning_rate": "fast"}}]})")
                            .string() +
                        " --out " + work("o_field").string());
  CHECK(field.code == 2);
  CHECK(field.output.find("train.learning_rate") != std::string::npos);

  CHECK(sh("run " + work("absent.json").string() + " --out " + work("o_absent").string()).code == 2);
}

TEST_CASE("errored cells exit 3 and still write outputs") {
  const auto cfg = write_config("gamma0.json", R"({"experiments": [{"id": "g0", "kind": "ratio_sweep",
      "model": {"bias": false}, "target": {"w0": [1.0]},
      "sampling": {"n_values": [1], "lo": 0.0, "hi": 1.0},
      "init": {"scale": 1e-20}, "ratio_grid_points": 3}]})");
  const auto out = work("o_gamma0");
  const auto r = sh("run " + cfg.string() + " --out " + out.string());
  CHECK(r.code == 3);
  CHECK(fs::exists(out / "g0.csv"));
  const auto m = nlohmann::json::parse(read_file((out / "manifest.json").string()));
  CHECK(m["experiments"][0]["status"].get<std::string>().rfind("error", 0) == 0);
}

TEST_CASE("fig5-style run writes one CSV per n plus the branch table, reproducibly") {
  const auto cfg = write_config("fig5.json", kSmallFig5);
  const auto a = work("o_fig5_a"), b = work("o_fig5_b");
  REQUIRE(sh("run " + cfg.string() + " --out " + a.string() + " --threads 2").code == 0);
  REQUIRE(sh("run " + cfg.string() + " --out " + b.string() + " --threads 1").code == 0);
  for (const char* f : {"fig5_n2.csv", "fig5_n3.csv", "fig5_n4.csv", "fig5_n5.csv", "fig5_n6.csv", "fig5_branch.csv"}) {
    REQUIRE(fs::exists(a / f));
    CHECK(read_file((a / f).string()) == read_file((b / f).string()));
  }
  const auto m = nlohmann::json::parse(read_file((a / "manifest.json").string()));
  CHECK(m["experiments"][0]["files"].size() == 6);
  CHECK(m["config_path"] == cfg.string());
}

TEST_CASE("NRL_SEED_OFFSET shifts seeds") {
  const auto cfg = write_config("fig5_off.json", kSmallFig5);
  const auto out = work("o_offset");
  REQUIRE(sh("run " + cfg.string() + " --out " + out.string(), "NRL_SEED_OFFSET=10").code == 0);
  const auto text = read_file((out / "fig5_n2.csv").string());
  CHECK(text.find("\nfig5,2,10,10,") != std::string::npos);
  CHECK(sh("run " + cfg.string() + " --out " + out.string(), "NRL_SEED_OFFSET=abc").code == 2);
}

TEST_CASE("classify an exact Q1 endpoint") {
  Trajectory t;
  t.snapshots = {snap(0, {1e-3, 1e-3, 1e-3, 2e-3, 2e-3, 2e-3}, 1.0)};
  t.terminal = snap(10, {0.3, 1.0, 1.0, 0.7, 1.0, 1.0}, 0.0);
  t.stop_reason = StopReason::kLossThreshold;
  const auto r = sh("classify " + save(t, "q1.ndjson") + " --target-a0 1 --target-w0 1,1");
  CHECK(r.code == 0);
  CHECK(r.output.find("branch: Q1") != std::string::npos);
  CHECK(r.output.find("q1_distance: 0\n") != std::string::npos);
  CHECK(r.output.find("c_tilde_init: 0.5") != std::string::npos);
}

TEST_CASE("classify a diverged run") {
  Trajectory t;
  t.snapshots = {snap(0, {1e-3, 1e-3, 1e-3, 2e-3, 2e-3, 2e-3}, 1.0)};
  t.terminal = snap(7, {std::nan(""), 1.0, 1.0, 0.7, 1.0, 1.0}, std::nan(""));
  t.stop_reason = StopReason::kDivergence;
  const auto r = sh("classify " + save(t, "div.ndjson.gz") + " --target-w0 1 1");
  CHECK(r.code == 0);
  CHECK(r.output.find("branch: Unresolved") != std::string::npos);
  CHECK(r.output.find("diverged") != std::string::npos);
}

TEST_CASE("classify rejects malformed files") {
  const auto p = work("bad.ndjson");
  std::ofstream(p) << "{\"iter\": 0}\n";
  CHECK(sh("classify " + p.string()).code == 2);
  CHECK(sh("classify " + work("none.ndjson").string()).code == 2);
}

TEST_CASE("classify a trained n=6 run at c-tilde 0.9") {
  SamplingPlan plan;
  const auto data = make_dataset(example_target(), plan, 0);
  const auto g = compute_gamma(data);
  RngStream rng(3, Stream::kInit);
  const auto theta0 = impose_c_tilde(init_params(2, 2, 1e-8, rng), g, 0.9);
  TrainConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.max_iters = 200000;
  cfg.record_stride = 1000;
  const auto path = save(train(theta0, data, Activation::tanh(), cfg), "c09.ndjson.gz");
  const auto r = sh("classify " + path + " --tol 0.2");
  CHECK(r.code == 0);
  CHECK(r.output.find("c_tilde_init: 0.9") != std::string::npos);
  CHECK(r.output.find("branch: Q1") != std::string::npos);
}
