#include "nrl/activation.hpp"

#include <algorithm>
#include <cmath>

#include "nrl/error.hpp"

namespace nrl {

Activation Activation::tanh() { return Activation("tanh", Kind::kTanh, true, true, true); }

Activation Activation::rational_odd() { return Activation("x/(1+x^2)", Kind::kRationalOdd, true, true, true); }

Activation Activation::custom(std::string name, Fn eval, Fn d1, Fn d2, bool analytic, bool odd) {
  require(eval && d1 && d2, ErrorCode::kInvalidInput, "custom activation needs eval, d1 and d2");
  const double s0 = eval(0.0);
  const double slope0 = d1(0.0);
  const bool admissible = s0 == 0.0 && std::isfinite(slope0) && std::abs(slope0) > 0.0;
  Activation act(std::move(name), Kind::kCustom, admissible, analytic, odd);
  act.custom_ = std::make_shared<const Custom>(Custom{std::move(eval), std::move(d1), std::move(d2)});
  const auto chk = check_derivatives(act);
  require(chk.max_rel_err_d1 < 1e-6 && chk.max_rel_err_d2 < 1e-6, ErrorCode::kInvalidInput,
          "custom activation '" + act.name() + "': derivatives disagree with finite differences");
  return act;
}

Activation Activation::by_name(std::string_view name) {
  if (name == "tanh") return tanh();
  if (name == "x/(1+x^2)" || name == "rational") return rational_odd();
  fail(ErrorCode::kInvalidInput, "unknown activation '" + std::string(name) + "'");
}

namespace {

double stencil(const std::function<double(double)>& f, double x, double h) {
  return (f(x - 2 * h) - 8 * f(x - h) + 8 * f(x + h) - f(x + 2 * h)) / (12 * h);
}

}  // namespace

DerivativeCheck check_derivatives(const Activation& act, double lo, double hi, int points) {
  DerivativeCheck out;
  const double h = 1e-3;
  auto f = [&](double x) { return act.eval(x); };
  auto f1 = [&](double x) { return act.d1(x); };
  for (int k = 0; k < points; ++k) {
    const double x = points == 1 ? lo : lo + (hi - lo) * k / (points - 1);
    const double e1 = act.d1(x), e2 = act.d2(x);
    out.max_rel_err_d1 = std::max(out.max_rel_err_d1, std::abs(stencil(f, x, h) - e1) / std::max(std::abs(e1), 1e-3));
    out.max_rel_err_d2 = std::max(out.max_rel_err_d2, std::abs(stencil(f1, x, h) - e2) / std::max(std::abs(e2), 1e-3));
  }
  return out;
}

}  // namespace nrl
