#include "nrl/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "nrl/geometry.hpp"
#include "nrl/linalg.hpp"
#include "nrl/rng.hpp"
#include "nrl/spectral.hpp"

namespace nrl {

namespace {

struct Suite {
  std::vector<CheckResult> results;
  const std::function<void(const CheckResult&)>& on_result;

  void add(std::string name, double measured, double tol, std::string detail = {}) {
    CheckResult r{std::move(name), std::isfinite(measured) && measured < tol, measured, tol, std::move(detail)};
    if (on_result) on_result(r);
    results.push_back(std::move(r));
  }
};

double max_abs(const Vec& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

Dataset even_data(const TargetSpec& target, std::size_t n) {
  SamplingPlan plan;
  plan.n = n;
  return make_dataset(target, plan, 0);
}

NetworkParams random_params(std::size_t m, std::size_t d_aug, double scale, RngStream& rng) {
  NetworkParams p(m, d_aug);
  for (double& v : p.flat()) v = scale * rng.normal();
  return p;
}

void check_derivatives_of(Suite& s, const Activation& act) {
  const auto d = check_derivatives(act);
  s.add("activation-derivatives[" + act.name() + "]", std::max(d.max_rel_err_d1, d.max_rel_err_d2), 1e-6);
}

void check_gradient(Suite& s, const VerifyOptions& opts) {
  RngStream rng(opts.seed, Stream::kVerify);
  double worst = 0.0;
  std::string where;
  for (int k = 0; k < opts.gradient_instances; ++k) {
    const std::size_t m = 1 + rng.next_u64() % 3;
    const std::size_t d = 1 + rng.next_u64() % 4;
    const std::size_t n = 1 + rng.next_u64() % 6;
    const bool bias = rng.uniform() < 0.5;
    const Activation act = rng.uniform() < 0.5 ? Activation::tanh() : Activation::rational_odd();
    const std::size_t d_aug = d + (bias ? 1 : 0);
    Vec w0(d_aug);
    for (double& v : w0) v = rng.normal();
    TargetSpec target(0.5 + rng.uniform(), w0, act);
    Vec x(n * d);
    for (double& v : x) v = rng.normal();
    const Dataset data = dataset_from_inputs(target, d, bias, x);
    const NetworkParams theta = random_params(m, d_aug, 1.0, rng);

    const Vec g = opts.gradient_under_test ? opts.gradient_under_test(theta, data, act) : gradient(theta, data, act);
    const Vec fd = finite_diff_gradient(theta, data, act);
    Vec diff(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) diff[i] = g[i] - fd[i];
    const double rel = max_abs(diff) / std::max(max_abs(fd), 1e-12);
    if (!(rel <= worst)) {
      worst = rel;
      where = "instance " + std::to_string(k) + " (m=" + std::to_string(m) + ", d=" + std::to_string(d) +
              ", n=" + std::to_string(n) + ", " + act.name() + ")";
    }
  }
  s.add("gradient-vs-finite-differences", worst, 1e-5,
        std::to_string(opts.gradient_instances) + " instances, worst at " + where);
}

void check_hessian(Suite& s) {
  for (const Activation& act : {Activation::tanh(), Activation::rational_odd()}) {
    const TargetSpec target(1.0, {1.0, 1.0}, act);
    const Dataset data = even_data(target, 6);
    for (std::size_t m : {2u, 3u}) {
      const auto h = hessian_at_origin(data, act, m);
      const Matrix num = numeric_neg_hessian_at_origin(data, act, m);
      double err = 0.0;
      for (std::size_t i = 0; i < num.data.size(); ++i) err = std::max(err, std::abs(num.data[i] - h.neg_hessian.data[i]));
      s.add("hessian-closed-form-vs-numeric[" + act.name() + ", m=" + std::to_string(m) + "]", err, 1e-5);

      const auto g = compute_gamma(data);
      const double expect = std::abs(act.d1(0.0)) * g.norm;
      const auto eig = jacobi_eigen(h.neg_hessian);
      s.add("top-eigenvalue-equals-gamma-norm[" + act.name() + ", m=" + std::to_string(m) + "]",
            std::max(std::abs(eig.values.front() - expect), std::abs(h.spectrum.mu1 - expect)) / expect, 1e-10);

      double res = 0.0;
      Vec v(h.neg_hessian.rows, 0.0);
      std::copy(h.top_direction.begin(), h.top_direction.end(), v.begin());
      const Vec hv = matvec(h.neg_hessian, v);
      for (std::size_t i = 0; i < v.size(); ++i) res = std::max(res, std::abs(hv[i] - h.spectrum.mu1 * v[i]));
      s.add("top-eigenvector-residual[" + act.name() + ", m=" + std::to_string(m) + "]", res / expect, 1e-12);
    }
  }
}

void check_time_shift(Suite& s) {
  const TargetSpec target = example_target();
  const Dataset data = even_data(target, 6);
  const auto g = compute_gamma(data);
  NeuronScales base;
  base.c = {0.7, -1.3};
  double worst = 0.0, worst_flow = 0.0;
  for (double alpha : {1e-2, 1e-5, 1e-8}) {
    NeuronScales small = base;
    for (double& c : small.c) c *= alpha;
    for (double t : {-1.0, 0.0, 2.5}) {
      const auto ref = linearized_params(base, g, t, data.d_aug());
      const auto got = linearized_params(small, g, t + time_shift(alpha, g), data.d_aug());
      for (std::size_t i = 0; i < ref.size(); ++i)
        worst = std::max(worst, std::abs(got.flat()[i] - ref.flat()[i]) / std::max(std::abs(ref.flat()[i]), 1e-300));
    }
  }
  const auto h = hessian_at_origin(data, target.activation, 2);
  const auto p = linearized_params(base, g, 0.3, data.d_aug());
  const Vec hp = matvec(h.neg_hessian, p.flat());
  for (std::size_t i = 0; i < p.size(); ++i)
    worst_flow = std::max(worst_flow, std::abs(hp[i] - g.norm * p.flat()[i]) / max_abs(hp));
  s.add("time-shift-law", worst, 1e-12, "scaling C by alpha equals shifting t by log(1/alpha)/|gamma|");
  s.add("linearized-flow-is-top-mode", worst_flow, 1e-12);

  const double d = std::abs(time_shift(1e-10, g) - time_shift(1e-8, g) - std::log(100.0) / g.norm);
  s.add("time-shift-additivity", d, 1e-12);
}

void check_symmetries(Suite& s, std::uint64_t seed) {
  RngStream rng(seed + 1, Stream::kVerify);
  const TargetSpec target = example_target();
  const Dataset data = even_data(target, 6);
  const auto g = compute_gamma(data);
  const Activation act = target.activation;
  double perm = 0.0, sign = 0.0, lin = 0.0, stat = 0.0;
  for (int k = 0; k < 20; ++k) {
    const NetworkParams theta = random_params(3, 2, 1.0, rng);
    const double l = loss(theta, data, act);
    NetworkParams swapped = theta;
    for (std::size_t i = 0; i < theta.block(); ++i) std::swap(swapped.neuron(0)[i], swapped.neuron(2)[i]);
    perm = std::max(perm, std::abs(loss(swapped, data, act) - l) / l);
    NetworkParams flipped = theta;
    for (double& v : flipped.neuron(1)) v = -v;
    sign = std::max(sign, std::abs(loss(flipped, data, act) - l) / l);

    const double kscale = 0.1 + 3.0 * rng.uniform();
    NetworkParams scaled = theta;
    for (double& v : scaled.flat()) v *= kscale;
    const auto c0 = neuron_scales(theta, g).c;
    const auto c1 = neuron_scales(scaled, g).c;
    for (std::size_t i = 0; i < c0.size(); ++i) {
      double size = std::abs(theta.a(i));
      for (double v : theta.w(i)) size += std::abs(v);
      lin = std::max(lin, std::abs(c1[i] - kscale * c0[i]) / (kscale * size * g.norm));
    }
  }
  s.add("loss-permutation-invariance", perm, 1e-14);
  s.add("loss-sign-flip-invariance", sign, 1e-14);
  s.add("neuron-scale-linearity", lin, 1e-13);

  stat = max_abs(gradient(NetworkParams(3, 2), data, act));
  s.add("origin-is-stationary", stat, 1e-15);
}

void check_branches(Suite& s) {
  const TargetSpec target = example_target();
  const Dataset data = even_data(target, 6);
  NetworkParams q1(2, 2, {0.3, 1.0, 1.0, 0.7, 1.0, 1.0});
  NetworkParams q2(2, 2, {-1.0, -1.0, -1.0, 0.0, 0.4, -2.0});
  const auto bq1 = branch_distances(q1, target, 1e-3);
  const auto bq2 = branch_distances(q2, target, 1e-3);
  s.add("q1-member-distance", bq1.q1, 1e-14);
  s.add("q2-member-distance", bq2.q2, 1e-14);
  s.add("q1-member-loss", loss(q1, data, target.activation), 1e-28);
  s.add("q2-member-loss", loss(q2, data, target.activation), 1e-28);
  const bool ok = classify(q1, target) == Branch::kQ1 && classify(q2, target) == Branch::kQ2;
  s.add("branch-classification", ok ? 0.0 : 1.0, 0.5);
}

void check_determinism(Suite& s) {
  const TargetSpec target = example_target();
  const Dataset data = even_data(target, 6);
  RngStream rng(3, Stream::kInit);
  const NetworkParams theta = random_params(2, 2, 1e-3, rng);
  TrainConfig cfg;
  cfg.max_iters = 2000;
  cfg.record_stride = 10;
  const auto a = train(theta, data, target.activation, cfg);
  const auto b = train(theta, data, target.activation, cfg);
  bool same = a.terminal.theta == b.terminal.theta && a.snapshots.size() == b.snapshots.size();
  for (std::size_t k = 0; same && k < a.snapshots.size(); ++k) same = a.snapshots[k].theta == b.snapshots[k].theta;
  s.add("training-bit-reproducible", same ? 0.0 : 1.0, 0.5);
}

void check_rng(Suite& s) {
  using A4 = std::array<std::uint32_t, 4>;
  bool ok = RngStream::philox_block({0, 0, 0, 0}, {0, 0}) == A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8} &&
            RngStream::philox_block({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
                A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1};
  RngStream r(42, 2);
  ok = ok && r.next_u64() == 0xa8875dcbd36c0225ULL;
  s.add(std::string("rng-known-answers[") + RngStream::kAlgorithm + "]", ok ? 0.0 : 1.0, 0.5);
}

}  // namespace

std::vector<CheckResult> run_verify(const VerifyOptions& opts, const std::function<void(const CheckResult&)>& on_result) {
  Suite s{{}, on_result};
  const std::vector<std::pair<const char*, std::function<void()>>> groups = {
      {"activation-derivatives", [&] {
         check_derivatives_of(s, Activation::tanh());
         check_derivatives_of(s, Activation::rational_odd());
       }},
      {"gradient", [&] { check_gradient(s, opts); }},
      {"hessian", [&] { check_hessian(s); }},
      {"time-shift", [&] { check_time_shift(s); }},
      {"symmetries", [&] { check_symmetries(s, opts.seed); }},
      {"branches", [&] { check_branches(s); }},
      {"determinism", [&] { check_determinism(s); }},
      {"rng", [&] { check_rng(s); }},
  };
  for (const auto& [name, run] : groups) {
    try {
      run();
    } catch (const std::exception& e) {
      s.add(std::string(name) + "-raised", std::numeric_limits<double>::infinity(), 0.0, e.what());
    }
  }
  return s.results;
}

}  // namespace nrl
