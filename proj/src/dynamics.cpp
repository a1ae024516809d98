#include "nrl/dynamics.hpp"

#include <cmath>

#include "nrl/error.hpp"

namespace nrl {

void TrainConfig::validate() const {
  require(learning_rate > 0.0 && std::isfinite(learning_rate), ErrorCode::kInvalidInput, "learning_rate must be > 0");
  require(max_iters >= 1, ErrorCode::kInvalidInput, "max_iters must be >= 1");
  require(stop_loss >= 0.0, ErrorCode::kInvalidInput, "stop_loss must be >= 0");
  require(record_stride >= 1, ErrorCode::kInvalidInput, "record_stride must be >= 1");
  require(record_budget >= 2, ErrorCode::kInvalidInput, "record_budget must be >= 2");
}

std::string to_string(StopReason reason) {
  switch (reason) {
    case StopReason::kLossThreshold:
      return "loss-threshold";
    case StopReason::kMaxIters:
      return "max-iters";
    case StopReason::kDivergence:
      return "divergence";
  }
  return "?";
}

StopReason stop_reason_from_string(const std::string& s) {
  if (s == "loss-threshold") return StopReason::kLossThreshold;
  if (s == "max-iters") return StopReason::kMaxIters;
  if (s == "divergence") return StopReason::kDivergence;
  fail(ErrorCode::kInvalidInput, "unknown stop reason '" + s + "'");
}

namespace {

void check_dims(const NetworkParams& theta, const Dataset& data) {
  require(theta.d_aug() == data.d_aug(), ErrorCode::kInvalidInput,
          "params d_aug " + std::to_string(theta.d_aug()) + " != dataset d_aug " + std::to_string(data.d_aug()));
}

}  // namespace

double loss(const NetworkParams& theta, const Dataset& data, const Activation& act) {
  check_dims(theta, data);
  double s = 0.0;
  for (std::size_t j = 0; j < data.n(); ++j) {
    const double r = forward(theta, act, data.x(j)) - data.y(j);
    s += r * r;
  }
  return 0.5 * s;
}

double loss_and_gradient(const NetworkParams& theta, const Dataset& data, const Activation& act, Vec& grad) {
  check_dims(theta, data);
  const std::size_t m = theta.m(), d = theta.d_aug(), b = theta.block(), n = data.n();
  thread_local Vec sig, slope;
  sig.resize(m * n);
  slope.resize(m * n);
  grad.assign(theta.size(), 0.0);
  const double* th = theta.flat().data();
  const double* xs = data.x_flat().data();
  double total = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double* x = xs + j * d;
    double f = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double* w = th + i * b + 1;
      double z = 0.0;
      for (std::size_t k = 0; k < d; ++k) z += w[k] * x[k];
      act.eval_d1(z, sig[i * n + j], slope[i * n + j]);
      f += th[i * b] * sig[i * n + j];
    }
    const double r = f - data.y(j);
    total += r * r;
    for (std::size_t i = 0; i < m; ++i) {
      double* g = grad.data() + i * b;
      g[0] += r * sig[i * n + j];
      const double c = r * th[i * b] * slope[i * n + j];
      for (std::size_t k = 0; k < d; ++k) g[1 + k] += c * x[k];
    }
  }
  return 0.5 * total;
}

Vec gradient(const NetworkParams& theta, const Dataset& data, const Activation& act) {
  Vec g;
  loss_and_gradient(theta, data, act, g);
  return g;
}

Vec finite_diff_gradient(const NetworkParams& theta, const Dataset& data, const Activation& act, double step) {
  require(step > 0.0, ErrorCode::kInvalidInput, "finite difference step must be > 0");
  Vec g(theta.size());
  NetworkParams probe = theta;
  for (std::size_t k = 0; k < theta.size(); ++k) {
    const double x = theta.flat()[k];
    const double h = step * (1.0 + std::abs(x));
    probe.flat()[k] = x + h;
    const double up = loss(probe, data, act);
    probe.flat()[k] = x - h;
    const double down = loss(probe, data, act);
    probe.flat()[k] = x;
    g[k] = (up - down) / (2.0 * h);
  }
  return g;
}

Trajectory train(const NetworkParams& theta0, const Dataset& data, const Activation& act, const TrainConfig& cfg) {
  cfg.validate();
  check_dims(theta0, data);
  Trajectory out;
  out.stride = cfg.record_stride;
  NetworkParams theta = theta0;
  Vec grad;
  const double eta = cfg.learning_rate;
  for (std::int64_t k = 0;; ++k) {
    const double l = loss_and_gradient(theta, data, act, grad);
    if (!std::isfinite(l) || !theta.all_finite()) {
      out.stop_reason = StopReason::kDivergence;
      out.terminal = {k, theta, l};
      break;
    }
    if (k % out.stride == 0) {
      out.snapshots.push_back({k, theta, l});
      if (out.snapshots.size() > cfg.record_budget) {
        std::size_t keep = 0;
        for (std::size_t s = 0; s < out.snapshots.size(); s += 2) out.snapshots[keep++] = std::move(out.snapshots[s]);
        out.snapshots.resize(keep);
        out.stride *= 2;
      }
    }
    if (l <= cfg.stop_loss) {
      out.stop_reason = StopReason::kLossThreshold;
      out.terminal = {k, theta, l};
      break;
    }
    if (k == cfg.max_iters) {
      out.stop_reason = StopReason::kMaxIters;
      out.terminal = {k, theta, l};
      break;
    }
    auto& p = theta.flat();
    for (std::size_t q = 0; q < p.size(); ++q) p[q] -= eta * grad[q];
  }
  return out;
}

}  // namespace nrl
