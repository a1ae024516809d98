#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nrl/nrl.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitCellFailed = 3;

template <class T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using TargetPtr = std::unique_ptr<nrl_target, Deleter<nrl_target, nrl_target_free>>;
using DataPtr = std::unique_ptr<nrl_dataset, Deleter<nrl_dataset, nrl_dataset_free>>;
using ParamsPtr = std::unique_ptr<nrl_params, Deleter<nrl_params, nrl_params_free>>;
using TrajPtr = std::unique_ptr<nrl_trajectory, Deleter<nrl_trajectory, nrl_trajectory_free>>;

struct Failure {
  int exit_code;
  std::string message;
};

void check(nrl_status s, const std::string& what, int exit_code = kExitFailure) {
  if (s == NRL_OK) return;
  throw Failure{exit_code, what + ": " + nrl_status_string(s) + ": " + nrl_last_error()};
}

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::int64_t seed_offset_from_env() {
  const char* env = std::getenv("NRL_SEED_OFFSET");
  if (env == nullptr || *env == '\0') return 0;
  char* end = nullptr;
  const long long v = std::strtoll(env, &end, 10);
  if (*end != '\0') throw Failure{kExitUsage, std::string("NRL_SEED_OFFSET must be an integer, got '") + env + "'"};
  return v;
}

int cmd_run(const std::string& config, const std::string& out, unsigned threads, bool paper_scale) {
  nrl_run_options opts{threads, paper_scale ? 1 : 0, seed_offset_from_env()};
  const nrl_status s = nrl_run_config(
      config.c_str(), out.c_str(), &opts, [](const char* line, void*) { std::fprintf(stderr, "%s\n", line); },
      nullptr);
  switch (s) {
    case NRL_OK:
      return kExitOk;
    case NRL_ERR_CONFIG:
      std::fprintf(stderr, "config error: %s\n", nrl_last_error());
      return kExitUsage;
    case NRL_ERR_CELL_FAILED:
      std::fprintf(stderr, "run finished with errors: %s\n", nrl_last_error());
      return kExitCellFailed;
    default:
      std::fprintf(stderr, "%s: %s\n", nrl_status_string(s), nrl_last_error());
      return kExitFailure;
  }
}

int cmd_verify(const std::string& fault) {
  int all = 0;
  const nrl_status s = nrl_verify(
      fault.empty() ? nullptr : fault.c_str(),
      [](const char* name, int passed, double measured, double tol, const char* detail, void*) {
        std::printf("%s %-52s measured=%-12s tol=%s%s%s\n", passed ? "PASS" : "FAIL", name, num(measured).c_str(),
                    num(tol).c_str(), *detail ? "  " : "", detail);
      },
      nullptr, &all);
  check(s, "verify", kExitUsage);
  std::printf("%s\n", all ? "all checks passed" : "some checks FAILED");
  return all ? kExitOk : kExitFailure;
}

struct ClassifyArgs {
  std::string file;
  double a0 = 1.0;
  std::vector<double> w0 = {1.0, 1.0};
  std::string activation = "tanh";
  std::size_t n = 6;
  std::size_t d = 0;
  bool no_bias = false;
  std::string sampler = "even";
  double lo = -2.0, hi = 2.0;
  std::uint64_t data_seed = 0;
  double tol = 1e-3;
  std::string eval;
  std::size_t eval_points = 1000;
  std::uint64_t eval_seed = 0;
};

int cmd_classify(const ClassifyArgs& a) {
  const std::size_t d_aug = a.w0.size();
  const int bias = a.no_bias ? 0 : 1;
  if (d_aug < static_cast<std::size_t>(1 + bias))
    throw Failure{kExitUsage, "--target-w0 needs at least " + std::to_string(1 + bias) + " values"};
  const std::size_t d = d_aug - bias;

  nrl_target* t = nullptr;
  check(nrl_target_create(a.a0, a.w0.data(), d_aug, a.activation.c_str(), &t), "target", kExitUsage);
  TargetPtr target(t);
  nrl_trajectory* tr = nullptr;
  check(nrl_trajectory_load(a.file.c_str(), d_aug, &tr), a.file, kExitUsage);
  TrajPtr traj(tr);
  nrl_trajectory_info info{};
  check(nrl_trajectory_info_get(traj.get(), &info), "trajectory");

  nrl_params* p = nullptr;
  check(nrl_trajectory_state(traj.get(), 0, &p), "initial state");
  ParamsPtr init(p);
  check(nrl_trajectory_state(traj.get(), info.snapshots, &p), "terminal state");
  ParamsPtr terminal(p);
  std::size_t m = 0;
  check(nrl_params_shape(terminal.get(), &m, nullptr), "shape");

  nrl_dataset* ds = nullptr;
  check(nrl_dataset_create(target.get(), a.sampler.c_str(), a.n, d, bias, a.lo, a.hi, a.data_seed, &ds), "dataset",
        kExitUsage);
  DataPtr data(ds);
  std::vector<double> c(m);
  double c_tilde = std::nan("");
  check(nrl_neuron_scales(init.get(), data.get(), c.data(), m, &c_tilde), "neuron scales");

  const std::string eval = a.eval.empty() ? (d == 1 ? "grid" : "cube") : a.eval;
  double gen = std::nan("");
  check(nrl_generalization_error(terminal.get(), target.get(), eval.c_str(), a.eval_points, a.lo, a.hi, a.eval_seed,
                                 &gen),
        "generalization error", kExitUsage);

  static const char* kReasons[] = {"loss-threshold", "max-iters", "divergence"};
  std::printf("file: %s\n", a.file.c_str());
  std::printf("neurons: %zu\n", m);
  std::printf("terminal_iter: %lld\n", static_cast<long long>(info.terminal_iter));
  std::printf("terminal_loss: %s\n", num(info.terminal_loss).c_str());
  std::printf("stop_reason: %s\n", kReasons[info.stop_reason]);
  std::printf("gen_error: %s\n", num(gen).c_str());
  std::printf("c_tilde_init: %s\n", num(c_tilde).c_str());

  if (info.stop_reason == NRL_STOP_DIVERGENCE) {
    std::printf("branch: Unresolved\n");
    std::printf("note: run diverged at iteration %lld; no branch assigned\n",
                static_cast<long long>(info.terminal_iter));
    return kExitOk;
  }
  if (m != 2) {
    std::printf("branch: Unresolved\n");
    std::printf("note: branch labels need exactly two neurons\n");
    return kExitOk;
  }
  nrl_branch_report rep{};
  check(nrl_classify(terminal.get(), target.get(), a.tol, &rep), "classify");
  static const char* kBranches[] = {"Q1", "Q2", "Unresolved"};
  std::printf("branch: %s\n", kBranches[rep.branch]);
  std::printf("q1_distance: %s\n", num(rep.q1_distance).c_str());
  std::printf("q2_distance: %s\n", num(rep.q2_distance).c_str());
  if (rep.q2_boundary) std::printf("note: nearest Q2 point lies on the Q1/Q2 boundary\n");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Small-initialization dynamics of two-layer networks"};
  app.set_version_flag("--version", nrl_version());
  app.require_subcommand(1);

  std::string config, out;
  unsigned threads = 0;
  bool paper_scale = false;
  auto* run = app.add_subcommand("run", "Run every experiment in a config file");
  run->add_option("config", config, "Config JSON")->required();
  run->add_option("--out", out, "Output directory")->required();
  run->add_option("--threads", threads, "Worker cap (0: machine parallelism)");
  run->add_flag("--paper-scale", paper_scale, "Apply each experiment's paper_scale overrides");

  std::string fault;
  auto* verify = app.add_subcommand("verify", "Run the numerical oracle suite");
  verify->add_option("--inject-fault", fault)->group("")->check(CLI::IsMember({"gradient-sign"}));

  ClassifyArgs ca;
  auto* classify = app.add_subcommand("classify", "Report the branch reached by a saved trajectory");
  classify->add_option("file", ca.file, "Trajectory (.ndjson or .ndjson.gz)")->required();
  classify->add_option("--target-a0", ca.a0, "Target output weight");
  classify->add_option("--target-w0", ca.w0, "Target weights, bias last")->delimiter(',')->expected(1, -1);
  classify->add_option("--activation", ca.activation, "tanh or x/(1+x^2)");
  classify->add_option("--n", ca.n, "Training points used to compute c-tilde");
  classify->add_flag("--no-bias", ca.no_bias, "Inputs carry no bias coordinate");
  classify->add_option("--sampler", ca.sampler, "even, gaussian or cube");
  classify->add_option("--lo", ca.lo, "Lower end of the input interval");
  classify->add_option("--hi", ca.hi, "Upper end of the input interval");
  classify->add_option("--data-seed", ca.data_seed, "Data seed for random samplers");
  classify->add_option("--tol", ca.tol, "Branch distance tolerance");
  classify->add_option("--eval", ca.eval, "grid, gaussian or cube");
  classify->add_option("--eval-points", ca.eval_points, "Evaluation points");
  classify->add_option("--eval-seed", ca.eval_seed, "Evaluation seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*run) return cmd_run(config, out, threads, paper_scale);
    if (*verify) return cmd_verify(fault);
    if (*classify) return cmd_classify(ca);
  } catch (const Failure& f) {
    std::fprintf(stderr, "error: %s\n", f.message.c_str());
    return f.exit_code;
  }
  return kExitFailure;
}
