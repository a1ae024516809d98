#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "nrl/dynamics.hpp"
#include "nrl/linalg.hpp"
#include "nrl/model.hpp"

namespace nrl {

// gamma = sum_j y_j x_j over augmented inputs.
struct GammaVector {
  Vec gamma;
  double norm = 0.0;
};

GammaVector compute_gamma(const Dataset& data);

// C_i = a_i |gamma| + w_i . gamma
struct NeuronScales {
  Vec c;
  std::optional<double> ratio_c;  // C_1 / C_2, m == 2 and C_2 != 0
  std::optional<double> c_tilde;  // min(|c|, |1/c|), 0 when either C vanishes; m == 2 only
};

NeuronScales neuron_scales(const NetworkParams& theta, const GammaVector& g);
double c_tilde_from_ratio(double ratio);

struct HessianSpectrum {
  double mu1 = 0.0;
  double mu2 = 0.0;  // largest eigenvalue strictly below mu1
  std::size_t top_eigenspace_dim = 0;
  double rate_exponent = 0.0;  // (mu1 - mu2) / (2 mu1 - mu2)
};

struct HessianAtOrigin {
  HessianSpectrum spectrum;
  Matrix neg_hessian;       // -Hess(loss)(0), block diagonal
  std::vector<double> eigenvalues;  // closed form, descending, with multiplicity
  Vec top_direction;        // unit eigenvector of one block: (|gamma|, s gamma) / (sqrt(2) |gamma|)
};

// Closed form: one block per neuron, sigma'(0) * [[0, gamma^T], [gamma, 0]].
HessianAtOrigin hessian_at_origin(const Dataset& data, const Activation& act, std::size_t m);

// Second differences of the loss at theta = 0, negated. Oracle for the above.
Matrix numeric_neg_hessian_at_origin(const Dataset& data, const Activation& act, std::size_t m, double h = 1e-4);

// log(1/alpha) / |gamma|
double time_shift(double alpha, const GammaVector& g);

// Early-phase approximation of the flow from a small init with scales C.
NetworkParams linearized_params(const NeuronScales& scales, const GammaVector& g, double t, std::size_t d_aug);

// Scales neuron k's block so that C_k / C_1 = target_ratios[k]; neuron 1 is untouched.
NetworkParams rescale_to_ratio(const NetworkParams& theta, const GammaVector& g, const Vec& target_ratios);

// How iteration counts translate to flow time when aligning runs.
enum class TimeMapping {
  // t = iter * eta; one step multiplies the top mode by exp(eta mu1).
  kForwardEuler,
  // One GD step multiplies the top mode by exactly (1 + eta mu1).
  kDiscreteGrowth,
};

enum class Interpolation { kLinear, kCubic };

struct AlignmentOptions {
  TimeMapping mapping = TimeMapping::kDiscreteGrowth;
  Interpolation interpolation = Interpolation::kCubic;
  // Growth rate of the top mode; defaults to |gamma| when zero.
  double mu1 = 0.0;
  // Multiply every neuron block by sign(C_i) at the run's first snapshot before
  // measuring distances. Odd activations only.
  bool orient_by_scales = true;
};

struct AlignmentReport {
  double shift = 0.0;            // fractional iteration shift applied to run B
  std::int64_t shift_iters = 0;  // nearest-integer shift
  double sup_distance = 0.0;     // max parameter distance over the overlap
  double sup_loss_gap = 0.0;     // max |loss_A - loss_B| over the overlap
  std::int64_t overlap_len = 0;  // snapshots of A compared
};

// Compares A at iteration k with B at iteration k - shift, where shift is the
// iteration equivalent of time_shift(alphaA) - time_shift(alphaB).
AlignmentReport align_trajectories(const Trajectory& a, const Trajectory& b, double alpha_a, double alpha_b,
                                   const GammaVector& g, double eta, const AlignmentOptions& opts = {});

// Parameter state of a trajectory at a fractional iteration, interpolated
// between snapshots. Returns nullopt outside the recorded range.
std::optional<Vec> interpolate_state(const Trajectory& t, double iter, Interpolation kind);
std::optional<double> interpolate_loss(const Trajectory& t, double iter, Interpolation kind = Interpolation::kCubic);

}  // namespace nrl
