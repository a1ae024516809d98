// Usage: acceptance <criterion 1..9>. Prints one line per criterion and exits
// non-zero when it fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include <unistd.h>

#include "nrl/error.hpp"
#include "nrl/experiments.hpp"
#include "nrl/io.hpp"
#include "nrl/runner.hpp"
#include "nrl/verify.hpp"

namespace fs = std::filesystem;
using namespace nrl;

namespace {

using Clock = std::chrono::steady_clock;

struct Verdict {
  bool pass = true;
  std::ostringstream detail;
  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    detail << (ok ? " [ok] " : " [FAIL] ") << what << ";";
  }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

ExperimentConfig config(const std::string& file, const std::string& id) {
  for (auto& e : load_run_config(std::string(NRL_CONFIG_DIR) + "/" + file).experiments)
    if (e.id == id) return e;
  throw Error(ErrorCode::kConfig, file + ": no experiment " + id);
}

std::string label(Branch b) { return to_string(b); }

void criterion1(Verdict& v) {
  const auto t0 = Clock::now();
  const auto checks = run_verify();
  const double secs = seconds_since(t0);
  std::size_t failed = 0;
  std::map<std::string, double> worst;
  for (const auto& c : checks) {
    if (!c.passed) ++failed;
    for (const char* key : {"gradient-vs-finite-differences", "hessian-closed-form-vs-numeric",
                            "top-eigenvalue-equals-gamma-norm"})
      if (c.name.rfind(key, 0) == 0) worst[key] = std::max(worst[key], c.measured);
  }
  v.require(failed == 0, std::to_string(checks.size() - failed) + "/" + std::to_string(checks.size()) + " checks pass");
  v.require(worst.count("gradient-vs-finite-differences") && worst["gradient-vs-finite-differences"] < 1e-5,
            "gradient rel err " + fmt(worst["gradient-vs-finite-differences"]) + " < 1e-5");
  v.require(worst.count("hessian-closed-form-vs-numeric") && worst["hessian-closed-form-vs-numeric"] < 1e-5,
            "hessian err " + fmt(worst["hessian-closed-form-vs-numeric"]) + " < 1e-5");
  v.require(worst.count("top-eigenvalue-equals-gamma-norm") && worst["top-eigenvalue-equals-gamma-norm"] < 1e-10,
            "top eigenvalue rel err " + fmt(worst["top-eigenvalue-equals-gamma-norm"]) + " < 1e-10");
  v.require(secs < 60.0, "runtime " + fmt(secs) + " s < 60 s");
}

void criterion2(Verdict& v) {
  const auto cfg = config("fig2.json", "fig2");
  const auto study = run_alignment_study(cfg);
  const auto& tr = study.trials;
  v.require(tr.size() == 3, "three scales");
  if (tr.size() != 3) return;
  for (const auto& t : tr)
    v.detail << " alpha=" << fmt(t.scale) << " sup_dist=" << fmt(t.vs_reference.sup_distance)
             << " overlap=" << t.vs_reference.overlap_len << ";";
  v.require(tr[1].vs_reference.sup_distance < 1e-2, "sup distance 1e-8 vs 1e-10 < 1e-2");
  v.require(tr[0].vs_reference.sup_distance > tr[1].vs_reference.sup_distance,
            "distances strictly decrease along alpha");
  v.require(tr[0].vs_reference.overlap_len > 0 && tr[1].vs_reference.overlap_len > 0, "non-empty overlap");
}

void criterion3(Verdict& v) {
  const auto cfg = config("fig2.json", "fig2_rate");
  const auto study = run_alignment_study(cfg);
  const double predicted = study.spectrum.rate_exponent;
  for (std::size_t k = 0; k + 1 < study.trials.size(); ++k)
    v.detail << " alpha=" << fmt(study.trials[k].scale) << " sup_dist=" << fmt(study.trials[k].vs_reference.sup_distance)
             << ";";
  v.detail << " mu1=" << fmt(study.spectrum.mu1) << " mu2=" << fmt(study.spectrum.mu2) << ";";
  v.require(study.fit_defined && study.trials.size() == 5, "fit over 4 scales");
  v.require(study.slope > 0.0, "slope " + fmt(study.slope) + " > 0");
  v.require(study.slope >= 0.5 * predicted && study.slope <= 1.5 * predicted,
            "slope in [" + fmt(0.5 * predicted) + ", " + fmt(1.5 * predicted) + "] (predicted " + fmt(predicted) + ")");
}

bool endpoint(double c) { return c == 0.0 || c == 1.0; }

void criterion4(Verdict& v) {
  const auto t0 = Clock::now();
  const auto cfg = config("fig5.json", "fig5");
  const auto results = run_ratio_sweep(cfg);
  std::map<std::size_t, std::vector<const SweepResult*>> by_n;
  for (const auto& r : results) by_n[r.n].push_back(&r);
  auto count = [&](std::size_t n, auto pred) {
    return std::count_if(by_n[n].begin(), by_n[n].end(), [&](const SweepResult* r) { return pred(*r); });
  };
  for (auto& [n, rs] : by_n)
    v.detail << " n=" << n << " recovered=" << count(n, [](auto& r) { return r.recovered; }) << "/" << rs.size()
             << " max_iters=" << count(n, [](auto& r) { return r.stop_reason == StopReason::kMaxIters; }) << ";";

  v.require(count(2, [](auto& r) { return r.recovered; }) == 0, "n=2 no recovered cells");

  std::set<std::uint64_t> seeds3;
  for (auto* r : by_n[3]) seeds3.insert(r->data_seed);
  const auto stray3 = count(3, [](auto& r) { return r.recovered && !endpoint(r.c_tilde); });
  const auto missing3 = count(3, [](auto& r) { return !r.recovered && endpoint(r.c_tilde); });
  for (auto* r : by_n[3])
    if (r->recovered != endpoint(r->c_tilde))
      v.detail << " n=3 seed " << r->data_seed << " c~=" << fmt(r->c_tilde) << " recovered=" << r->recovered
               << " mse=" << fmt(r->gen_error) << ";";
  v.require(stray3 == 0 && missing3 == 0, "n=3 recovered exactly at c~ in {0,1}");

  std::map<std::uint64_t, int> interior4;
  for (auto* r : by_n[4]) interior4[r->data_seed] += (r->recovered && !endpoint(r->c_tilde)) ? 1 : 0;
  bool any_interior = false, some_seed_without = false;
  for (auto& [s, k] : interior4) {
    any_interior = any_interior || k > 0;
    some_seed_without = some_seed_without || k == 0;
  }
  v.require(any_interior, "n=4 some interior recovery");
  v.require(some_seed_without, "n=4 some data seed without interior recovery");

  const auto rec6 = count(6, [](auto& r) { return r.recovered; });
  v.require(!by_n[6].empty() && rec6 == static_cast<long>(by_n[6].size()), "n=6 all cells recovered");
  const double secs = seconds_since(t0);
  v.require(secs < 600.0, "runtime " + fmt(secs) + " s < 600 s");
}

void criterion5(Verdict& v) {
  const auto t0 = Clock::now();
  const auto cfg = config("fig4.json", "fig4");
  const auto study = run_branch_study(cfg);
  std::size_t converged = 0, unresolved = 0;
  std::map<std::string, int> counts;
  for (std::size_t i = 0; i < study.runs.size(); ++i) {
    if (!study.converged[i]) continue;
    ++converged;
    ++counts[label(study.runs[i].branch)];
    if (study.runs[i].branch == Branch::kUnresolved) {
      ++unresolved;
      v.detail << " unresolved seed " << study.runs[i].init_seed << " c~=" << fmt(study.runs[i].c_tilde)
               << " q1=" << fmt(study.runs[i].q1_distance) << " q2=" << fmt(study.runs[i].q2_distance) << ";";
    }
  }
  v.detail << " converged=" << converged << "/" << study.runs.size();
  for (auto& [k, c] : counts) v.detail << " " << k << "=" << c;
  v.detail << ";";
  v.require(converged > 0, "some run converged");
  v.require(unresolved == 0, "every converged run is Q1 or Q2");
  const auto& f = study.fit;
  v.require(f.defined, "boundary defined");
  if (f.defined) {
    v.require(f.lower >= 0.74 * 0.75 && f.lower <= 0.74 * 1.25, "lower |c| boundary " + fmt(f.lower) + " within 25% of 0.74");
    v.require(f.upper >= 1.35 * 0.75 && f.upper <= 1.35 * 1.25, "upper |c| boundary " + fmt(f.upper) + " within 25% of 1.35");
  }
  const double secs = seconds_since(t0);
  v.require(secs < 300.0, "runtime " + fmt(secs) + " s < 300 s");
}

void criterion6(Verdict& v) {
  const auto cfg = config("fig1.json", "fig1");
  const auto results = run_scale_sweep(cfg);
  std::map<std::pair<std::size_t, double>, std::pair<double, int>> mean;
  for (const auto& r : results) {
    if (!r.error.empty() || !std::isfinite(r.gen_error)) continue;
    auto& m = mean[{r.n, r.scale}];
    m.first += r.gen_error;
    ++m.second;
  }
  for (std::size_t n : cfg.n_values) {
    const auto small = mean[{n, 1e-8}], large = mean[{n, 1e-1}];
    const double ms = small.second ? small.first / small.second : NAN;
    const double ml = large.second ? large.first / large.second : NAN;
    v.require(ms < ml, "n=" + std::to_string(n) + " mean gen error " + fmt(ms) + " @1e-8 < " + fmt(ml) + " @1e-1");
  }
}

void criterion7(Verdict& v) {
  const auto cfg = config("fig8.json", "fig8");
  for (const auto& run : run_width_study(cfg)) {
    const auto top = static_cast<std::size_t>(std::ceil(0.05 * static_cast<double>(run.width)));
    v.require(run.gen_error < 1e-4, "width " + std::to_string(run.width) + " mse " + fmt(run.gen_error) +
                                        " < 1e-4 (train loss " + fmt(run.final_loss) + ")");
    v.require(run.argmax_c_rank < top, "width " + std::to_string(run.width) + " argmax|C| rank " +
                                           std::to_string(run.argmax_c_rank) + " in top " + std::to_string(top));
  }
}

void criterion8(Verdict& v) {
  const auto t0 = Clock::now();
  const auto cfg = config("fig11.json", "fig11");
  const auto results = run_highdim_study(cfg);
  std::map<std::size_t, std::vector<const SweepResult*>> by_n;
  for (const auto& r : results) by_n[r.n].push_back(&r);
  bool exact5 = !by_n[5].empty();
  for (auto* r : by_n[5]) exact5 = exact5 && (r->recovered == endpoint(r->c_tilde));
  bool all9 = !by_n[9].empty();
  std::size_t rec9 = 0;
  for (auto* r : by_n[9]) {
    all9 = all9 && r->recovered;
    rec9 += r->recovered;
    if (!r->recovered)
      v.detail << " n=9 seed " << r->data_seed << " c~=" << fmt(r->c_tilde) << " mse=" << fmt(r->gen_error)
               << " stop=" << to_string(r->stop_reason) << ";";
  }
  v.require(exact5, "n=5 recovers only at c~ in {0,1}");
  v.require(all9, "n=9 recovers at every grid point (" + std::to_string(rec9) + "/" + std::to_string(by_n[9].size()) + ")");
  const double secs = seconds_since(t0);
  v.require(secs < 300.0, "runtime " + fmt(secs) + " s < 300 s");
}

std::map<std::string, std::string> csvs(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".csv") out[e.path().filename().string()] = read_file(e.path().string());
  return out;
}

void criterion9(Verdict& v) {
  const fs::path root = fs::temp_directory_path() / ("nrl_acceptance_" + std::to_string(::getpid()));
  std::vector<fs::path> configs;
  for (const auto& e : fs::directory_iterator(NRL_CONFIG_DIR))
    if (e.path().extension() == ".json") configs.push_back(e.path());
  std::sort(configs.begin(), configs.end());
  for (const auto& path : configs) {
    const auto cfg = load_run_config(path.string());
    const auto a = root / (path.stem().string() + "_a"), b = root / (path.stem().string() + "_b");
    RunOptions one, many;
    one.threads = 1;
    run_experiments(cfg, path.string(), a.string(), one);
    run_experiments(cfg, path.string(), b.string(), many);
    const auto ca = csvs(a), cb = csvs(b);
    v.require(!ca.empty() && ca == cb, path.filename().string() + ": " + std::to_string(ca.size()) + " CSVs identical");
  }
  fs::remove_all(root);
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: %s <criterion 1..9>\n", argv[0]);
    return 2;
  }
  const int k = std::atoi(argv[1]);
  void (*const fns[])(Verdict&) = {criterion1, criterion2, criterion3, criterion4, criterion5,
                                   criterion6, criterion7, criterion8, criterion9};
  if (k < 1 || k > 9) {
    std::fprintf(stderr, "criterion must be 1..9\n");
    return 2;
  }
  Verdict v;
  const auto t0 = Clock::now();
  try {
    fns[k - 1](v);
  } catch (const std::exception& e) {
    v.require(false, std::string("raised: ") + e.what());
  }
  std::printf("criterion %d: %s (%.1f s)%s\n", k, v.pass ? "PASS" : "FAIL", seconds_since(t0), v.detail.str().c_str());
  return v.pass ? 0 : 1;
}
