#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <string_view>

namespace nrl {

// An activation with its first two derivatives. The two built-ins are odd and
// analytic; user-supplied triples go through check_admissibility() at
// construction so the flags reflect what was actually measured.
class Activation {
 public:
  enum class Kind { kTanh, kRationalOdd, kCustom };

  using Fn = std::function<double(double)>;

  static Activation tanh();
  // x / (1 + x^2)
  static Activation rational_odd();
  static Activation custom(std::string name, Fn eval, Fn d1, Fn d2, bool analytic, bool odd);

  // "tanh" or "x/(1+x^2)" (alias "rational").
  static Activation by_name(std::string_view name);

  const std::string& name() const { return name_; }
  Kind kind() const { return kind_; }
  bool admissible_thm1() const { return admissible_; }
  bool analytic() const { return analytic_; }
  bool odd() const { return odd_; }

  double eval(double x) const {
    switch (kind_) {
      case Kind::kTanh:
        return std::tanh(x);
      case Kind::kRationalOdd:
        return x / (1.0 + x * x);
      case Kind::kCustom:
        break;
    }
    return custom_->eval(x);
  }

  double d1(double x) const {
    switch (kind_) {
      case Kind::kTanh: {
        const double t = std::tanh(x);
        return 1.0 - t * t;
      }
      case Kind::kRationalOdd: {
        const double q = 1.0 + x * x;
        return (1.0 - x * x) / (q * q);
      }
      case Kind::kCustom:
        break;
    }
    return custom_->d1(x);
  }

  double d2(double x) const {
    switch (kind_) {
      case Kind::kTanh: {
        const double t = std::tanh(x);
        return -2.0 * t * (1.0 - t * t);
      }
      case Kind::kRationalOdd: {
        const double q = 1.0 + x * x;
        return (2.0 * x * x * x - 6.0 * x) / (q * q * q);
      }
      case Kind::kCustom:
        break;
    }
    return custom_->d2(x);
  }

  // Value and first derivative in one call; the hot loop of training uses this.
  void eval_d1(double x, double& value, double& slope) const {
    if (kind_ == Kind::kTanh) {
      value = std::tanh(x);
      slope = 1.0 - value * value;
      return;
    }
    value = eval(x);
    slope = d1(x);
  }

 private:
  struct Custom {
    Fn eval, d1, d2;
  };

  Activation(std::string name, Kind kind, bool admissible, bool analytic, bool odd)
      : name_(std::move(name)), kind_(kind), admissible_(admissible), analytic_(analytic), odd_(odd) {}

  std::string name_;
  Kind kind_;
  bool admissible_;
  bool analytic_;
  bool odd_;
  std::shared_ptr<const Custom> custom_;
};

// Largest relative discrepancy between (d1, d2) and central differences of
// eval (resp. d1) over an evenly spaced grid on [lo, hi].
struct DerivativeCheck {
  double max_rel_err_d1 = 0.0;
  double max_rel_err_d2 = 0.0;
};
DerivativeCheck check_derivatives(const Activation& act, double lo = -5.0, double hi = 5.0, int points = 201);

}  // namespace nrl
