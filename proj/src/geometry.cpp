#include "nrl/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nrl/error.hpp"
#include "nrl/rng.hpp"

namespace nrl {

std::string to_string(Branch b) {
  switch (b) {
    case Branch::kQ1:
      return "Q1";
    case Branch::kQ2:
      return "Q2";
    case Branch::kUnresolved:
      return "Unresolved";
  }
  return "?";
}

Branch branch_from_string(const std::string& s) {
  if (s == "Q1") return Branch::kQ1;
  if (s == "Q2") return Branch::kQ2;
  if (s == "Unresolved") return Branch::kUnresolved;
  fail(ErrorCode::kInvalidInput, "unknown branch '" + s + "'");
}

NetworkParams canonicalize(const NetworkParams& theta, const Activation& act) {
  require(act.odd(), ErrorCode::kInvalidInput, "canonicalize needs an odd activation");
  NetworkParams flipped = theta;
  for (std::size_t i = 0; i < theta.m(); ++i) {
    bool flip = flipped.a(i) < 0.0;
    if (flipped.a(i) == 0.0)
      for (double v : flipped.w(i))
        if (v != 0.0) {
          flip = v < 0.0;
          break;
        }
    if (flip)
      for (double& v : flipped.neuron(i)) v = -v;
  }
  std::vector<std::size_t> order(theta.m());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    const double ai = std::abs(flipped.a(i)), aj = std::abs(flipped.a(j));
    if (ai != aj) return ai > aj;
    const auto wi = flipped.w(i), wj = flipped.w(j);
    return std::lexicographical_compare(wi.begin(), wi.end(), wj.begin(), wj.end());
  });
  NetworkParams out(theta.m(), theta.d_aug());
  for (std::size_t i = 0; i < theta.m(); ++i)
    std::copy(flipped.neuron(order[i]).begin(), flipped.neuron(order[i]).end(), out.neuron(i).begin());
  return out;
}

namespace {

void check_pair(const NetworkParams& theta, const TargetSpec& target) {
  require(theta.m() == 2, ErrorCode::kInvalidInput, "branch distances need m = 2");
  require(theta.d_aug() == target.d_aug(), ErrorCode::kInvalidInput, "branch distances: dimension mismatch");
}

double dist2(std::span<const double> w, double sign, const Vec& w0) {
  double s = 0.0;
  for (std::size_t k = 0; k < w0.size(); ++k) s += (sign * w[k] - w0[k]) * (sign * w[k] - w0[k]);
  return s;
}

struct Q2Best {
  double d2 = INFINITY;
  std::size_t free_neuron = 1;
};

Q2Best q2_best(const NetworkParams& theta, const TargetSpec& target) {
  Q2Best best;
  for (std::size_t i = 0; i < 2; ++i) {
    const std::size_t j = 1 - i;
    for (double s : {1.0, -1.0}) {
      const double da = s * theta.a(i) - target.a0;
      const double d2 = dist2(theta.w(i), s, target.w0) + da * da + theta.a(j) * theta.a(j);
      if (d2 < best.d2) best = {d2, j};
    }
  }
  return best;
}

}  // namespace

double q1_distance(const NetworkParams& theta, const TargetSpec& target) {
  check_pair(theta, target);
  double best = INFINITY;
  for (double s0 : {1.0, -1.0})
    for (double s1 : {1.0, -1.0}) {
      const double da = s0 * theta.a(0) + s1 * theta.a(1) - target.a0;
      best = std::min(best, dist2(theta.w(0), s0, target.w0) + dist2(theta.w(1), s1, target.w0) + 0.5 * da * da);
    }
  return std::sqrt(best);
}

double q2_distance(const NetworkParams& theta, const TargetSpec& target) {
  check_pair(theta, target);
  return std::sqrt(q2_best(theta, target).d2);
}

BranchDistances branch_distances(const NetworkParams& theta, const TargetSpec& target, double tol) {
  BranchDistances out;
  out.q1 = q1_distance(theta, target);
  const auto best = q2_best(theta, target);
  out.q2 = std::sqrt(best.d2);
  const auto w = theta.w(best.free_neuron);
  out.q2_boundary = std::sqrt(std::min(dist2(w, 1.0, target.w0), dist2(w, -1.0, target.w0))) < tol;
  return out;
}

Branch classify(const NetworkParams& theta, const TargetSpec& target, double tol) {
  require(tol > 0.0, ErrorCode::kInvalidInput, "classify needs tol > 0");
  if (!theta.all_finite()) return Branch::kUnresolved;
  const double q1 = q1_distance(theta, target);
  const double q2 = q2_distance(theta, target);
  if (q1 < tol && q1 <= q2) return Branch::kQ1;
  if (q2 < tol && q2 < q1) return Branch::kQ2;
  return Branch::kUnresolved;
}

std::string to_string(EvalPlan::Kind kind) {
  switch (kind) {
    case EvalPlan::Kind::kGrid:
      return "grid";
    case EvalPlan::Kind::kGaussian:
      return "gaussian";
    case EvalPlan::Kind::kUniformCube:
      return "cube";
  }
  return "?";
}

EvalPlan::Kind eval_kind_from_string(const std::string& s) {
  if (s == "grid") return EvalPlan::Kind::kGrid;
  if (s == "gaussian") return EvalPlan::Kind::kGaussian;
  if (s == "cube") return EvalPlan::Kind::kUniformCube;
  fail(ErrorCode::kInvalidInput, "unknown eval plan '" + s + "' (grid, gaussian, cube)");
}

Vec eval_inputs(const EvalPlan& plan, std::size_t d) {
  require(plan.points >= 1, ErrorCode::kInvalidInput, "eval plan needs points >= 1");
  Vec x(plan.points * d);
  RngStream rng(plan.seed, Stream::kEval);
  switch (plan.kind) {
    case EvalPlan::Kind::kGrid:
      require(d == 1, ErrorCode::kInvalidInput, "grid evaluation is 1-D only");
      require(plan.lo < plan.hi, ErrorCode::kInvalidInput, "grid evaluation needs lo < hi");
      for (std::size_t j = 0; j < plan.points; ++j)
        x[j] = plan.points == 1 ? plan.lo
                                : plan.lo + (plan.hi - plan.lo) * static_cast<double>(j) / (plan.points - 1);
      if (plan.points > 1) x.back() = plan.hi;
      break;
    case EvalPlan::Kind::kGaussian:
      for (double& v : x) v = rng.normal();
      break;
    case EvalPlan::Kind::kUniformCube:
      for (double& v : x) v = rng.uniform(plan.lo, plan.hi);
      break;
  }
  return x;
}

double generalization_error(const NetworkParams& theta, const TargetSpec& target, const Activation& act,
                            const EvalPlan& plan) {
  require(theta.d_aug() == target.d_aug(), ErrorCode::kInvalidInput, "generalization_error: dimension mismatch");
  const std::size_t extra = plan.bias ? 1 : 0;
  require(target.d_aug() > extra, ErrorCode::kInvalidInput, "generalization_error: no raw inputs");
  const std::size_t d = target.d_aug() - extra;
  const Vec x = eval_inputs(plan, d);
  double s = 0.0;
  for (std::size_t j = 0; j < plan.points; ++j) {
    const auto xa = augment(std::span<const double>(x.data() + j * d, d), plan.bias);
    const double r = forward(theta, act, xa) - target_eval(target, xa);
    s += r * r;
  }
  return s / static_cast<double>(plan.points);
}

SampleSizeTable sample_size_table(SampleSetting setting) {
  switch (setting) {
    case SampleSetting::kOneD:
      return {3, 4, 5, 6};
    case SampleSetting::kD3:
      return {5, 6, 9, std::nullopt};
  }
  return {};
}

}  // namespace nrl
