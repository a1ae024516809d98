#include "nrl/model.hpp"

#include <cmath>

#include "nrl/error.hpp"
#include "nrl/rng.hpp"

namespace nrl {

NetworkParams::NetworkParams(std::size_t m, std::size_t d_aug) : NetworkParams(m, d_aug, Vec(m * (d_aug + 1), 0.0)) {}

NetworkParams::NetworkParams(std::size_t m, std::size_t d_aug, Vec flat) : m_(m), d_aug_(d_aug), flat_(std::move(flat)) {
  require(m >= 1 && d_aug >= 1, ErrorCode::kInvalidInput, "NetworkParams needs m >= 1 and d_aug >= 1");
  require(flat_.size() == m * (d_aug + 1), ErrorCode::kInvalidInput,
          "NetworkParams: flat length " + std::to_string(flat_.size()) + " != m*(d_aug+1) = " +
              std::to_string(m * (d_aug + 1)));
}

bool NetworkParams::all_finite() const {
  for (double v : flat_)
    if (!std::isfinite(v)) return false;
  return true;
}

double NetworkParams::norm() const {
  double s = 0.0;
  for (double v : flat_) s += v * v;
  return std::sqrt(s);
}

TargetSpec::TargetSpec(double a0_, Vec w0_, Activation act) : a0(a0_), w0(std::move(w0_)), activation(std::move(act)) {
  require(std::isfinite(a0) && a0 != 0.0, ErrorCode::kInvalidInput, "target a0 must be finite and nonzero");
  bool nonzero = false;
  for (double v : w0) {
    require(std::isfinite(v), ErrorCode::kInvalidInput, "target w0 must be finite");
    nonzero = nonzero || v != 0.0;
  }
  require(nonzero, ErrorCode::kInvalidInput, "target w0 needs a nonzero coordinate");
}

TargetSpec example_target() { return TargetSpec(1.0, {1.0, 1.0}, Activation::tanh()); }

Dataset::Dataset(std::size_t d_aug, bool bias_enabled, Vec x_flat, Vec y)
    : d_aug_(d_aug), bias_(bias_enabled), x_(std::move(x_flat)), y_(std::move(y)) {
  require(d_aug_ >= 1, ErrorCode::kInvalidInput, "dataset needs d_aug >= 1");
  require(!y_.empty(), ErrorCode::kInvalidInput, "dataset needs n >= 1");
  require(x_.size() == y_.size() * d_aug_, ErrorCode::kInvalidInput, "dataset: x length != n*d_aug");
  for (double v : x_) require(std::isfinite(v), ErrorCode::kInvalidInput, "dataset: non-finite input");
  for (double v : y_) require(std::isfinite(v), ErrorCode::kInvalidInput, "dataset: non-finite label");
  if (bias_)
    for (std::size_t j = 0; j < n(); ++j)
      require(x(j)[d_aug_ - 1] == 1.0, ErrorCode::kInvalidInput, "dataset: bias coordinate must equal 1");
}

std::string to_string(SamplingPlan::Kind kind) {
  switch (kind) {
    case SamplingPlan::Kind::kEvenlySpaced:
      return "even";
    case SamplingPlan::Kind::kGaussian:
      return "gaussian";
    case SamplingPlan::Kind::kUniformCube:
      return "cube";
  }
  return "?";
}

SamplingPlan::Kind sampling_kind_from_string(const std::string& s) {
  if (s == "even") return SamplingPlan::Kind::kEvenlySpaced;
  if (s == "gaussian") return SamplingPlan::Kind::kGaussian;
  if (s == "cube") return SamplingPlan::Kind::kUniformCube;
  fail(ErrorCode::kInvalidInput, "unknown sampler '" + s + "' (even, gaussian, cube)");
}

double dot(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), ErrorCode::kInvalidInput, "dimension mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

double forward(const NetworkParams& params, const Activation& act, std::span<const double> x_aug) {
  require(x_aug.size() == params.d_aug(), ErrorCode::kInvalidInput,
          "forward: input length " + std::to_string(x_aug.size()) + " != d_aug " + std::to_string(params.d_aug()));
  double f = 0.0;
  for (std::size_t i = 0; i < params.m(); ++i) f += params.a(i) * act.eval(dot(params.w(i), x_aug));
  return f;
}

double target_eval(const TargetSpec& target, std::span<const double> x_aug) {
  require(x_aug.size() == target.d_aug(), ErrorCode::kInvalidInput, "target_eval: dimension mismatch");
  return target.a0 * target.activation.eval(dot(target.w0, x_aug));
}

Vec augment(std::span<const double> x, bool bias) {
  Vec out(x.begin(), x.end());
  if (bias) out.push_back(1.0);
  return out;
}

Dataset dataset_from_inputs(const TargetSpec& target, std::size_t d, bool bias, const Vec& x_raw) {
  require(d >= 1 && x_raw.size() % d == 0 && !x_raw.empty(), ErrorCode::kInvalidInput, "inputs must be n x d");
  const std::size_t n = x_raw.size() / d;
  const std::size_t d_aug = d + (bias ? 1 : 0);
  require(d_aug == target.d_aug(), ErrorCode::kInvalidInput, "target dimension does not match the inputs");
  Vec x, y;
  x.reserve(n * d_aug);
  y.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    const auto xa = augment(std::span<const double>(x_raw.data() + j * d, d), bias);
    y.push_back(target_eval(target, xa));
    x.insert(x.end(), xa.begin(), xa.end());
  }
  return Dataset(d_aug, bias, std::move(x), std::move(y));
}

Dataset make_dataset(const TargetSpec& target, const SamplingPlan& plan, std::uint64_t seed) {
  require(plan.n >= 1, ErrorCode::kInvalidInput, "sampling plan needs n >= 1");
  require(plan.d >= 1, ErrorCode::kInvalidInput, "sampling plan needs d >= 1");
  Vec x(plan.n * plan.d);
  RngStream rng(seed, Stream::kData);
  switch (plan.kind) {
    case SamplingPlan::Kind::kEvenlySpaced:
      require(plan.d == 1, ErrorCode::kInvalidInput, "even spacing is 1-D only");
      require(plan.lo < plan.hi, ErrorCode::kInvalidInput, "even spacing needs lo < hi");
      for (std::size_t j = 0; j < plan.n; ++j)
        x[j] = plan.n == 1 ? plan.lo : plan.lo + (plan.hi - plan.lo) * static_cast<double>(j) / (plan.n - 1);
      if (plan.n > 1) x[plan.n - 1] = plan.hi;
      break;
    case SamplingPlan::Kind::kGaussian:
      for (double& v : x) v = rng.normal();
      break;
    case SamplingPlan::Kind::kUniformCube:
      require(plan.lo < plan.hi, ErrorCode::kInvalidInput, "cube sampling needs lo < hi");
      for (double& v : x) v = rng.uniform(plan.lo, plan.hi);
      break;
  }
  return dataset_from_inputs(target, plan.d, plan.bias, x);
}

}  // namespace nrl
