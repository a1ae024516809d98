#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nrl/activation.hpp"

namespace nrl {

using Vec = std::vector<double>;

// theta = (a_1, w_1, ..., a_m, w_m), stored flat and neuron-major. With bias
// enabled the bias is the last coordinate of each w_i (augmented input).
class NetworkParams {
 public:
  NetworkParams() = default;
  NetworkParams(std::size_t m, std::size_t d_aug);
  NetworkParams(std::size_t m, std::size_t d_aug, Vec flat);

  std::size_t m() const { return m_; }
  std::size_t d_aug() const { return d_aug_; }
  std::size_t block() const { return d_aug_ + 1; }
  std::size_t size() const { return flat_.size(); }

  double a(std::size_t i) const { return flat_[i * block()]; }
  double& a(std::size_t i) { return flat_[i * block()]; }
  std::span<const double> w(std::size_t i) const { return {flat_.data() + i * block() + 1, d_aug_}; }
  std::span<double> w(std::size_t i) { return {flat_.data() + i * block() + 1, d_aug_}; }
  // (a_i, w_i) as one contiguous block.
  std::span<const double> neuron(std::size_t i) const { return {flat_.data() + i * block(), block()}; }
  std::span<double> neuron(std::size_t i) { return {flat_.data() + i * block(), block()}; }

  const Vec& flat() const { return flat_; }
  Vec& flat() { return flat_; }

  bool all_finite() const;
  double norm() const;

  friend bool operator==(const NetworkParams&, const NetworkParams&) = default;

 private:
  std::size_t m_ = 0;
  std::size_t d_aug_ = 0;
  Vec flat_;
};

struct TargetSpec {
  double a0 = 1.0;
  Vec w0;  // length d_aug
  Activation activation = Activation::tanh();

  TargetSpec() = default;
  TargetSpec(double a0, Vec w0, Activation act);
  std::size_t d_aug() const { return w0.size(); }
};

// The single-neuron target of the 1-D experiments: tanh(x + 1), bias folded in.
TargetSpec example_target();

class Dataset {
 public:
  Dataset(std::size_t d_aug, bool bias_enabled, Vec x_flat, Vec y);

  std::size_t n() const { return y_.size(); }
  std::size_t d_aug() const { return d_aug_; }
  bool bias_enabled() const { return bias_; }
  std::span<const double> x(std::size_t j) const { return {x_.data() + j * d_aug_, d_aug_}; }
  double y(std::size_t j) const { return y_[j]; }
  const Vec& x_flat() const { return x_; }
  const Vec& labels() const { return y_; }

 private:
  std::size_t d_aug_;
  bool bias_;
  Vec x_;
  Vec y_;
};

struct SamplingPlan {
  enum class Kind { kEvenlySpaced, kGaussian, kUniformCube };
  Kind kind = Kind::kEvenlySpaced;
  std::size_t n = 6;
  std::size_t d = 1;  // raw input dimension
  bool bias = true;
  double lo = -2.0;   // interval for even spacing / cube support
  double hi = 2.0;

  std::size_t d_aug() const { return d + (bias ? 1 : 0); }
};

std::string to_string(SamplingPlan::Kind kind);
SamplingPlan::Kind sampling_kind_from_string(const std::string& s);

double dot(std::span<const double> a, std::span<const double> b);

// sum_i a_i sigma(w_i . x)
double forward(const NetworkParams& params, const Activation& act, std::span<const double> x_aug);
double target_eval(const TargetSpec& target, std::span<const double> x_aug);

// Raw inputs (length d) to augmented inputs (length d_aug).
Vec augment(std::span<const double> x, bool bias);

Dataset make_dataset(const TargetSpec& target, const SamplingPlan& plan, std::uint64_t seed);
// Labels computed by target_eval on the given raw inputs (row-major n x d).
Dataset dataset_from_inputs(const TargetSpec& target, std::size_t d, bool bias, const Vec& x_raw);

}  // namespace nrl
