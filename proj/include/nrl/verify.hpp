#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nrl/dynamics.hpp"

namespace nrl {

struct CheckResult {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

using GradientFn = std::function<Vec(const NetworkParams&, const Dataset&, const Activation&)>;

struct VerifyOptions {
  std::uint64_t seed = 7;
  int gradient_instances = 100;
  // Replaces the analytic gradient under test; used to prove the suite can fail.
  GradientFn gradient_under_test;
};

std::vector<CheckResult> run_verify(const VerifyOptions& opts = {},
                                    const std::function<void(const CheckResult&)>& on_result = {});

}  // namespace nrl
