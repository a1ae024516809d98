#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "nrl/model.hpp"

namespace nrl {

enum class Branch { kQ1, kQ2, kUnresolved };
std::string to_string(Branch b);
Branch branch_from_string(const std::string& s);

// Per-neuron sign flip to a >= 0 (w's first nonzero coordinate > 0 when a == 0),
// then neurons sorted by descending |a|, ties broken lexicographically on w.
NetworkParams canonicalize(const NetworkParams& theta, const Activation& act);

// Distance to {w_1 = w_2 = w0, a_1 + a_2 = a0}, minimized over the sign and
// permutation orbit of theta. m must be 2.
double q1_distance(const NetworkParams& theta, const TargetSpec& target);

// Distance to {w_1 = w0, a_1 = a0, a_2 = 0} with w_2 free, minimized over the orbit.
double q2_distance(const NetworkParams& theta, const TargetSpec& target);

struct BranchDistances {
  double q1 = 0.0;
  double q2 = 0.0;
  // The free neuron of the nearest Q2 point sits within tol of w0: the point
  // is on the Q1/Q2 boundary where the open condition fails.
  bool q2_boundary = false;
};
BranchDistances branch_distances(const NetworkParams& theta, const TargetSpec& target, double tol);

// Q1 if q1 < tol and q1 <= q2; Q2 if q2 < tol and q2 < q1; otherwise Unresolved.
Branch classify(const NetworkParams& theta, const TargetSpec& target, double tol = 1e-3);

struct EvalPlan {
  enum class Kind { kGrid, kGaussian, kUniformCube };
  Kind kind = Kind::kGrid;
  std::size_t points = 1000;
  double lo = -2.0;
  double hi = 2.0;
  std::uint64_t seed = 0;
  bool bias = true;  // inputs are augmented with a trailing 1 before evaluation
};
std::string to_string(EvalPlan::Kind kind);
EvalPlan::Kind eval_kind_from_string(const std::string& s);

// Raw evaluation inputs (row-major points x d) for a plan; deterministic in plan.seed.
Vec eval_inputs(const EvalPlan& plan, std::size_t d);

// Mean squared difference between the network and the target over the plan.
double generalization_error(const NetworkParams& theta, const TargetSpec& target, const Activation& act,
                            const EvalPlan& plan);

struct SampleSizeTable {
  int optimistic = 0;
  int separation_q2 = 0;
  int separation_q1 = 0;
  std::optional<int> full_identification;
};

enum class SampleSetting { kOneD, kD3 };
SampleSizeTable sample_size_table(SampleSetting setting);

}  // namespace nrl
