#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nrl/model.hpp"

namespace nrl {

struct TrainConfig {
  double learning_rate = 0.05;
  std::int64_t max_iters = 200000;
  double stop_loss = 1e-15;
  std::int64_t record_stride = 1;
  std::size_t record_budget = 4096;

  void validate() const;
};

enum class StopReason { kLossThreshold, kMaxIters, kDivergence };
std::string to_string(StopReason reason);
StopReason stop_reason_from_string(const std::string& s);

struct Snapshot {
  std::int64_t iter = 0;
  NetworkParams theta;
  double loss = 0.0;
};

// Thinned record of one gradient-descent run. The terminal state is always
// exact, whatever thinning the snapshots went through.
struct Trajectory {
  std::vector<Snapshot> snapshots;
  Snapshot terminal;
  StopReason stop_reason = StopReason::kMaxIters;
  std::int64_t stride = 1;  // final spacing of snapshots after re-thinning
};

// 1/2 sum_j (f(x_j) - y_j)^2
double loss(const NetworkParams& theta, const Dataset& data, const Activation& act);

// Flat gradient, same layout as NetworkParams::flat().
Vec gradient(const NetworkParams& theta, const Dataset& data, const Activation& act);

// Loss and gradient in one pass; grad is resized as needed. Returns the loss.
double loss_and_gradient(const NetworkParams& theta, const Dataset& data, const Activation& act, Vec& grad);

// Central differences of loss() with per-coordinate step h_k = step * (1 + |theta_k|).
Vec finite_diff_gradient(const NetworkParams& theta, const Dataset& data, const Activation& act,
                         double step = 1e-6);

// theta <- theta - eta * grad(theta) until loss <= stop_loss, max_iters
// updates, or a non-finite loss/parameter shows up.
Trajectory train(const NetworkParams& theta0, const Dataset& data, const Activation& act, const TrainConfig& cfg);

}  // namespace nrl
