#include "nrl/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>
#include <tuple>

#include "nrl/error.hpp"

namespace nrl {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t offset(std::uint64_t seed, std::int64_t by) { return seed + static_cast<std::uint64_t>(by); }

}  // namespace

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kScaleSweep:
      return "scale_sweep";
    case ExperimentKind::kRatioSweep:
      return "ratio_sweep";
    case ExperimentKind::kBranchStudy:
      return "branch_study";
    case ExperimentKind::kAlignment:
      return "alignment_study";
    case ExperimentKind::kWidthStudy:
      return "width_study";
    case ExperimentKind::kHighDim:
      return "highdim";
  }
  return "?";
}

ExperimentKind experiment_kind_from_string(const std::string& s) {
  for (auto k : {ExperimentKind::kScaleSweep, ExperimentKind::kRatioSweep, ExperimentKind::kBranchStudy,
                 ExperimentKind::kAlignment, ExperimentKind::kWidthStudy, ExperimentKind::kHighDim})
    if (to_string(k) == s) return k;
  fail(ErrorCode::kConfig, "unknown experiment kind '" + s + "'");
}

TargetSpec ExperimentConfig::target() const {
  return TargetSpec(target_a0, target_w0, Activation::by_name(target_activation));
}

Activation ExperimentConfig::activation() const { return Activation::by_name(model.activation); }

void ExperimentConfig::validate() const {
  auto check = [&](bool ok, const std::string& msg) { require(ok, ErrorCode::kConfig, "experiment '" + id + "': " + msg); };
  check(!id.empty(), "id must be non-empty");
  check(model.m >= 1 && model.d >= 1, "model needs m >= 1 and d >= 1");
  check(target_w0.size() == model.d_aug(), "target w0 must have length d + bias");
  try {
    (void)target();
    (void)activation();
    train.validate();
  } catch (const Error& e) {
    fail(ErrorCode::kConfig, "experiment '" + id + "': " + e.what());
  }
  check(!n_values.empty(), "n_values must be non-empty");
  for (auto n : n_values) check(n >= 1, "every n must be >= 1");
  check(!data_seeds.empty(), "data seeds must be non-empty");
  check(!init_seeds.empty(), "init seeds must be non-empty");
  check(!scales.empty(), "scales must be non-empty");
  for (double s : scales) check(s > 0.0 && std::isfinite(s), "scales must be positive");
  check(recovery_threshold > 0.0, "recovery_threshold must be > 0");
  check(classify_tol > 0.0, "classify_tol must be > 0");
  if (ratio_override) {
    check(ratio_override->size() == model.m, "ratio_override needs one entry per neuron");
    check(!ratio_override->empty() && (*ratio_override)[0] == 1.0, "ratio_override[0] must be 1");
  }
  const bool two = model.m == 2;
  switch (kind) {
    case ExperimentKind::kHighDim:
      check(sampling.kind == SamplingPlan::Kind::kUniformCube, "highdim needs cube sampling");
      check(model.d > 1, "highdim needs d > 1");
      [[fallthrough]];
    case ExperimentKind::kRatioSweep:
      check(two, "ratio sweeps need m = 2");
      check(ratio_grid_points >= 2, "ratio_grid_points must be >= 2");
      check(scales.front() <= 1e-8, "ratio sweeps need a scale <= 1e-8");
      break;
    case ExperimentKind::kBranchStudy:
      check(two, "branch studies need m = 2");
      break;
    case ExperimentKind::kAlignment:
      check(scales.size() >= 2, "alignment needs at least two scales");
      check(model.m >= 2, "alignment needs m >= 2");
      check(base_ratio != 0.0 && std::isfinite(base_ratio), "base_ratio must be nonzero");
      break;
    case ExperimentKind::kWidthStudy:
      check(!widths.empty(), "width study needs widths");
      for (auto w : widths) check(w >= 1, "widths must be >= 1");
      check(model.d == 1, "width study is 1-D");
      check(output_grid_points >= 2, "output_grid_points must be >= 2");
      break;
    case ExperimentKind::kScaleSweep:
      break;
  }
}

NetworkParams init_params(std::size_t m, std::size_t d_aug, double scale, RngStream& rng) {
  require(scale > 0.0, ErrorCode::kInvalidInput, "init scale must be > 0");
  NetworkParams p(m, d_aug);
  for (double& v : p.flat()) v = scale * rng.normal();
  return p;
}

void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers = std::min<std::size_t>(threads, count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!first) first = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

std::pair<double, double> fit_line(const Vec& x, const Vec& y) {
  require(x.size() == y.size() && x.size() >= 2, ErrorCode::kInvalidInput, "fit_line needs >= 2 points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxx += (x[k] - mx) * (x[k] - mx);
    sxy += (x[k] - mx) * (y[k] - my);
  }
  require(sxx > 0.0, ErrorCode::kInvalidInput, "fit_line: x values are all equal");
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

void sort_results(std::vector<SweepResult>& results) {
  std::stable_sort(results.begin(), results.end(), [](const SweepResult& a, const SweepResult& b) {
    return std::tie(a.config_id, a.n, a.data_seed, a.scale, a.init_seed, a.grid_index) <
           std::tie(b.config_id, b.n, b.data_seed, b.scale, b.init_seed, b.grid_index);
  });
}

Vec c_tilde_grid(std::size_t points) {
  require(points >= 2, ErrorCode::kInvalidInput, "c_tilde grid needs >= 2 points");
  Vec g(points);
  for (std::size_t k = 0; k < points; ++k) g[k] = static_cast<double>(k) / static_cast<double>(points - 1);
  g.front() = 0.0;
  g.back() = 1.0;
  return g;
}

NetworkParams impose_c_tilde(const NetworkParams& base, const GammaVector& g, double c_tilde) {
  require(base.m() == 2, ErrorCode::kInvalidInput, "impose_c_tilde needs m = 2");
  require(c_tilde >= 0.0 && c_tilde <= 1.0, ErrorCode::kInvalidInput, "c_tilde must lie in [0, 1]");
  NetworkParams out = base;
  if (c_tilde == 0.0) {
    for (double& v : out.neuron(1)) v = 0.0;
  } else if (c_tilde == 1.0) {
    std::copy(base.neuron(0).begin(), base.neuron(0).end(), out.neuron(1).begin());
  } else {
    out = rescale_to_ratio(base, g, {1.0, c_tilde});
  }
  return out;
}

namespace {

struct Cell {
  std::size_t n = 0;
  std::uint64_t data_seed = 0;
  std::uint64_t init_seed = 0;
  std::size_t grid_index = 0;
  double scale = 0.0;
  double c_tilde = kNaN;  // prescribed; NaN means measure it from the init
};

TrainConfig terminal_only(TrainConfig cfg) {
  cfg.record_stride = std::max<std::int64_t>(1, cfg.max_iters);
  return cfg;
}

EvalPlan eval_plan_for(const ExperimentConfig& cfg, std::int64_t seed_offset) {
  EvalPlan p = cfg.eval;
  p.bias = cfg.model.bias;
  p.seed = offset(p.seed, seed_offset);
  return p;
}

void fill_outcome(SweepResult& r, const ExperimentConfig& cfg, const TargetSpec& target, const Activation& act,
                  const Trajectory& tr, const EvalPlan& plan) {
  const auto& theta = tr.terminal.theta;
  r.stop_reason = tr.stop_reason;
  r.final_loss = tr.terminal.loss;
  r.iters_used = tr.terminal.iter;
  if (!theta.all_finite()) {
    r.gen_error = kNaN;
    r.q1_distance = r.q2_distance = kNaN;
    r.branch = Branch::kUnresolved;
    r.recovered = false;
    return;
  }
  r.gen_error = generalization_error(theta, target, act, plan);
  r.recovered = r.gen_error < cfg.recovery_threshold;
  if (theta.m() == 2) {
    r.q1_distance = q1_distance(theta, target);
    r.q2_distance = q2_distance(theta, target);
    r.branch = classify(theta, target, cfg.classify_tol);
  } else {
    r.q1_distance = r.q2_distance = kNaN;
    r.branch = Branch::kUnresolved;
  }
}

struct Prepared {
  TargetSpec target;
  Activation act;
  std::vector<std::pair<std::size_t, std::uint64_t>> keys;
  std::vector<Dataset> datasets;
  std::vector<std::optional<GammaVector>> gammas;

  const Dataset& data(std::size_t n, std::uint64_t seed) const {
    for (std::size_t k = 0; k < keys.size(); ++k)
      if (keys[k].first == n && keys[k].second == seed) return datasets[k];
    fail(ErrorCode::kInternal, "dataset not prepared");
  }
  const std::optional<GammaVector>& gamma(std::size_t n, std::uint64_t seed) const {
    for (std::size_t k = 0; k < keys.size(); ++k)
      if (keys[k].first == n && keys[k].second == seed) return gammas[k];
    fail(ErrorCode::kInternal, "dataset not prepared");
  }
};

Prepared prepare(const ExperimentConfig& cfg, const RunOptions& opts) {
  cfg.validate();
  Prepared p{cfg.target(), cfg.activation(), {}, {}, {}};
  for (auto n : cfg.n_values)
    for (auto s : cfg.data_seeds) {
      SamplingPlan plan = cfg.sampling;
      plan.n = n;
      plan.d = cfg.model.d;
      plan.bias = cfg.model.bias;
      const auto seed = offset(s, opts.seed_offset);
      p.keys.emplace_back(n, seed);
      p.datasets.push_back(make_dataset(p.target, plan, seed));
      try {
        p.gammas.emplace_back(compute_gamma(p.datasets.back()));
      } catch (const Error&) {
        p.gammas.emplace_back(std::nullopt);
      }
    }
  return p;
}

NetworkParams draw_init(const ExperimentConfig& cfg, std::size_t m, double scale, std::uint64_t seed,
                        const std::optional<GammaVector>& g) {
  RngStream rng(seed, Stream::kInit);
  auto p = init_params(m, cfg.model.d_aug(), scale, rng);
  if (cfg.ratio_override) {
    require(g.has_value(), ErrorCode::kAssumptionViolation, "ratio_override needs gamma != 0");
    p = rescale_to_ratio(p, *g, *cfg.ratio_override);
  }
  return p;
}

std::vector<SweepResult> run_cells(const ExperimentConfig& cfg, const RunOptions& opts, const Prepared& prep,
                                   const std::vector<Cell>& cells, bool impose_ratio) {
  std::vector<SweepResult> out(cells.size());
  const auto plan = eval_plan_for(cfg, opts.seed_offset);
  const auto tcfg = terminal_only(cfg.train);
  parallel_for(cells.size(), opts.threads, [&](std::size_t k) {
    const Cell& c = cells[k];
    SweepResult& r = out[k];
    r.config_id = cfg.id;
    r.n = c.n;
    r.data_seed = c.data_seed;
    r.init_seed = c.init_seed;
    r.grid_index = c.grid_index;
    r.scale = c.scale;
    r.c_ratio = r.c_tilde = r.gen_error = r.q1_distance = r.q2_distance = r.final_loss = kNaN;
    try {
      const auto& data = prep.data(c.n, c.data_seed);
      const auto& g = prep.gamma(c.n, c.data_seed);
      auto theta = draw_init(cfg, cfg.model.m, c.scale, c.init_seed, g);
      if (impose_ratio) {
        require(g.has_value(), ErrorCode::kAssumptionViolation, "gamma = 0: ratio cannot be imposed");
        theta = impose_c_tilde(theta, *g, c.c_tilde);
      }
      if (g && theta.m() == 2) {
        const auto s = neuron_scales(theta, *g);
        r.c_ratio = s.ratio_c.value_or(kNaN);
        r.c_tilde = impose_ratio ? c.c_tilde : s.c_tilde.value_or(kNaN);
      }
      const auto tr = train(theta, data, prep.act, tcfg);
      fill_outcome(r, cfg, prep.target, prep.act, tr, plan);
    } catch (const std::exception& e) {
      r.error = e.what();
    }
  });
  sort_results(out);
  return out;
}

}  // namespace

std::vector<SweepResult> run_scale_sweep(const ExperimentConfig& cfg, const RunOptions& opts) {
  const auto prep = prepare(cfg, opts);
  std::vector<Cell> cells;
  for (auto n : cfg.n_values)
    for (auto ds : cfg.data_seeds)
      for (double scale : cfg.scales)
        for (auto is : cfg.init_seeds)
          cells.push_back({n, offset(ds, opts.seed_offset), offset(is, opts.seed_offset), 0, scale, kNaN});
  return run_cells(cfg, opts, prep, cells, false);
}

std::vector<SweepResult> run_ratio_sweep(const ExperimentConfig& cfg, const RunOptions& opts) {
  const auto prep = prepare(cfg, opts);
  const auto grid = c_tilde_grid(cfg.ratio_grid_points);
  std::vector<Cell> cells;
  for (auto n : cfg.n_values)
    for (auto ds : cfg.data_seeds)
      for (std::size_t k = 0; k < grid.size(); ++k)
        cells.push_back({n, offset(ds, opts.seed_offset), offset(cfg.init_seeds.front(), opts.seed_offset), k,
                         cfg.scales.front(), grid[k]});
  return run_cells(cfg, opts, prep, cells, true);
}

std::vector<SweepResult> run_highdim_study(const ExperimentConfig& cfg, const RunOptions& opts) {
  ExperimentConfig c = cfg;
  c.kind = ExperimentKind::kHighDim;
  c.validate();
  return run_ratio_sweep(c, opts);
}

BoundaryFit fit_branch_boundary(const std::vector<SweepResult>& results) {
  std::vector<std::pair<double, bool>> pts;  // (c_tilde, is_q1)
  for (const auto& r : results)
    if ((r.branch == Branch::kQ1 || r.branch == Branch::kQ2) && std::isfinite(r.c_tilde))
      pts.emplace_back(r.c_tilde, r.branch == Branch::kQ1);
  BoundaryFit fit;
  fit.used = pts.size();
  const auto q1 = std::count_if(pts.begin(), pts.end(), [](auto& p) { return p.second; });
  if (q1 == 0 || q1 == static_cast<long>(pts.size())) return fit;
  std::sort(pts.begin(), pts.end());
  std::size_t best_err = pts.size() + 1;
  double best_gap = -1.0;
  for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
    const double lo = pts[k].first, hi = pts[k + 1].first;
    if (lo == hi) continue;
    const double b = 0.5 * (lo + hi);
    std::size_t err = 0;
    for (const auto& [c, is_q1] : pts) err += (c >= b) != is_q1;
    if (err < best_err || (err == best_err && hi - lo > best_gap)) {
      best_err = err;
      best_gap = hi - lo;
      fit.c_tilde_boundary = b;
    }
  }
  if (best_gap < 0.0) return fit;
  fit.defined = true;
  fit.misclassified = best_err;
  fit.lower = fit.c_tilde_boundary;
  fit.upper = 1.0 / fit.c_tilde_boundary;
  return fit;
}

BranchStudy run_branch_study(const ExperimentConfig& cfg, const RunOptions& opts) {
  const auto prep = prepare(cfg, opts);
  std::vector<Cell> cells;
  for (auto n : cfg.n_values)
    for (auto ds : cfg.data_seeds)
      for (double scale : cfg.scales)
        for (auto is : cfg.init_seeds)
          cells.push_back({n, offset(ds, opts.seed_offset), offset(is, opts.seed_offset), 0, scale, kNaN});
  BranchStudy study;
  study.runs = run_cells(cfg, opts, prep, cells, false);
  std::vector<SweepResult> converged;
  for (const auto& r : study.runs) {
    const bool ok = r.error.empty() && std::isfinite(r.final_loss) && r.final_loss <= cfg.converged_loss;
    study.converged.push_back(ok);
    if (ok) converged.push_back(r);
  }
  study.fit = fit_branch_boundary(converged);
  return study;
}

AlignmentStudy run_alignment_study(const ExperimentConfig& cfg, const RunOptions& opts) {
  const auto prep = prepare(cfg, opts);
  const std::size_t n = cfg.n_values.front();
  const auto ds = offset(cfg.data_seeds.front(), opts.seed_offset);
  const auto& data = prep.data(n, ds);
  const auto& g = prep.gamma(n, ds);
  require(g.has_value(), ErrorCode::kAssumptionViolation, "alignment needs gamma != 0");
  const std::size_t m = cfg.model.m;

  Vec ratios(m, 1.0);
  if (m == 2) {
    ratios[1] = 1.0 / cfg.base_ratio;
  } else {
    for (std::size_t i = 1; i < m; ++i)
      ratios[i] = (cfg.ratio_start + cfg.ratio_step * static_cast<double>(i)) / cfg.ratio_start;
  }

  std::vector<std::size_t> order(cfg.scales.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return cfg.scales[i] > cfg.scales[j]; });

  AlignmentStudy study;
  study.spectrum = hessian_at_origin(data, prep.act, m).spectrum;
  study.trials.resize(order.size());
  study.runs.resize(order.size());
  TrainConfig tcfg = cfg.train;
  tcfg.record_stride = 1;
  tcfg.record_budget = static_cast<std::size_t>(cfg.train.max_iters) + 2;

  parallel_for(order.size(), opts.threads, [&](std::size_t k) {
    const std::size_t src = order[k];
    auto& t = study.trials[k];
    t.scale = cfg.scales[src];
    t.seed = offset(cfg.init_seeds[src % cfg.init_seeds.size()], opts.seed_offset);
    RngStream rng(t.seed, Stream::kInit);
    auto theta = rescale_to_ratio(init_params(m, cfg.model.d_aug(), t.scale, rng), *g, ratios);
    const auto s = neuron_scales(theta, *g);
    double c2 = 0.0;
    for (double c : s.c) c2 += c * c;
    t.alpha_eff = std::sqrt(c2);
    t.c_ratio = s.c[0] / s.c[1];
    study.runs[k] = train(theta, data, prep.act, tcfg);
    t.stop_reason = study.runs[k].stop_reason;
    t.final_loss = study.runs[k].terminal.loss;
  });

  AlignmentOptions aopts;
  aopts.mu1 = study.spectrum.mu1;
  aopts.orient_by_scales = prep.act.odd();
  const auto& ref = study.runs.back();
  const double alpha_ref = study.trials.back().alpha_eff;
  Vec xs, ys;
  for (std::size_t k = 0; k < study.trials.size(); ++k) {
    auto& t = study.trials[k];
    t.vs_reference = align_trajectories(ref, study.runs[k], alpha_ref, t.alpha_eff, *g, cfg.train.learning_rate, aopts);
    if (k + 1 < study.trials.size() && t.vs_reference.sup_distance > 0.0) {
      xs.push_back(std::log(t.scale));
      ys.push_back(std::log(t.vs_reference.sup_distance));
    }
  }
  if (xs.size() >= 2 && xs.size() + 1 == study.trials.size()) {
    std::tie(study.slope, study.intercept) = fit_line(xs, ys);
    study.fit_defined = true;
  }
  return study;
}

std::vector<WidthRun> run_width_study(const ExperimentConfig& cfg, const RunOptions& opts) {
  const auto prep = prepare(cfg, opts);
  const std::size_t n = cfg.n_values.front();
  const auto ds = offset(cfg.data_seeds.front(), opts.seed_offset);
  const auto& data = prep.data(n, ds);
  const auto& g = prep.gamma(n, ds);
  require(g.has_value(), ErrorCode::kAssumptionViolation, "width study needs gamma != 0");
  const auto plan = eval_plan_for(cfg, opts.seed_offset);
  const auto tcfg = terminal_only(cfg.train);
  const auto seed = offset(cfg.init_seeds.front(), opts.seed_offset);

  std::vector<WidthRun> runs(cfg.widths.size());
  parallel_for(runs.size(), opts.threads, [&](std::size_t k) {
    auto& run = runs[k];
    run.width = cfg.widths[k];
    RngStream rng(seed, Stream::kInit);
    const auto theta0 = init_params(run.width, cfg.model.d_aug(), cfg.scales.front(), rng);
    const auto c = neuron_scales(theta0, *g).c;
    const auto tr = train(theta0, data, prep.act, tcfg);
    const auto& theta = tr.terminal.theta;
    run.final_loss = tr.terminal.loss;
    run.stop_reason = tr.stop_reason;
    run.iters_used = tr.terminal.iter;
    run.gen_error = theta.all_finite() ? generalization_error(theta, prep.target, prep.act, plan) : kNaN;
    Vec norms;
    for (std::size_t i = 0; i < run.width; ++i) {
      double s = 0.0;
      for (double v : theta.neuron(i)) s += v * v;
      norms.push_back(std::sqrt(s));
      run.neurons.push_back({run.width, i, std::abs(c[i]), norms.back()});
    }
    run.argmax_c = static_cast<std::size_t>(
        std::max_element(c.begin(), c.end(), [](double a, double b) { return std::abs(a) < std::abs(b); }) -
        c.begin());
    run.argmax_c_rank = static_cast<std::size_t>(
        std::count_if(norms.begin(), norms.end(), [&](double v) { return v > norms[run.argmax_c]; }));
    for (std::size_t j = 0; j < cfg.output_grid_points; ++j) {
      const double x =
          cfg.eval.lo + (cfg.eval.hi - cfg.eval.lo) * static_cast<double>(j) / (cfg.output_grid_points - 1);
      const auto xa = augment(std::span<const double>(&x, 1), cfg.model.bias);
      run.grid_x.push_back(x);
      run.grid_output.push_back(forward(theta, prep.act, xa));
      run.grid_target.push_back(target_eval(prep.target, xa));
    }
  });
  return runs;
}

}  // namespace nrl
