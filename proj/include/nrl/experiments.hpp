#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nrl/dynamics.hpp"
#include "nrl/geometry.hpp"
#include "nrl/model.hpp"
#include "nrl/rng.hpp"
#include "nrl/spectral.hpp"

namespace nrl {

enum class ExperimentKind { kScaleSweep, kRatioSweep, kBranchStudy, kAlignment, kWidthStudy, kHighDim };
std::string to_string(ExperimentKind kind);
ExperimentKind experiment_kind_from_string(const std::string& s);

struct ModelSpec {
  std::size_t m = 2;
  std::size_t d = 1;
  bool bias = true;
  std::string activation = "tanh";

  std::size_t d_aug() const { return d + (bias ? 1 : 0); }
};

struct ExperimentConfig {
  std::string id;
  ExperimentKind kind = ExperimentKind::kRatioSweep;
  ModelSpec model;
  double target_a0 = 1.0;
  Vec target_w0 = {1.0, 1.0};
  std::string target_activation = "tanh";

  SamplingPlan sampling;                // sampling.n is overridden by n_values
  std::vector<std::size_t> n_values = {6};
  std::vector<std::uint64_t> data_seeds = {0};

  std::vector<double> scales = {1e-8};  // init scales; the first is used by ratio sweeps
  std::vector<std::uint64_t> init_seeds = {0};
  std::optional<Vec> ratio_override;    // C_k / C_1 applied after the Gaussian draw

  TrainConfig train;
  EvalPlan eval;
  double recovery_threshold = 1e-8;
  double classify_tol = 1e-3;

  // ratio sweeps
  std::size_t ratio_grid_points = 41;
  // branch study: runs with final loss above this do not count as converged
  double converged_loss = 1e-10;
  // alignment: C_1 / C_2 imposed on every trial
  double base_ratio = 0.5;
  // width study
  std::vector<std::size_t> widths;
  std::size_t output_grid_points = 201;
  // Multi-neuron ratio schedule C_i / C_1 = ratio_start + ratio_step (i - 1), used when m > 2
  // in alignment studies.
  double ratio_start = 1.5;
  double ratio_step = 0.0015;

  // output layout
  bool split_by_n = false;         // ratio sweeps: one CSV per n plus a branch table
  bool save_trajectories = false;  // alignment: one .ndjson.gz per trial

  TargetSpec target() const;
  Activation activation() const;
  void validate() const;
};

struct RunOptions {
  unsigned threads = 0;  // 0: hardware concurrency
  std::int64_t seed_offset = 0;
};

// Every coordinate i.i.d. Normal(0, scale^2), neuron-major, a before w.
NetworkParams init_params(std::size_t m, std::size_t d_aug, double scale, RngStream& rng);

struct SweepResult {
  std::string config_id;
  std::size_t n = 0;
  std::uint64_t data_seed = 0;
  std::uint64_t init_seed = 0;
  std::size_t grid_index = 0;
  double scale = 0.0;
  double c_ratio = 0.0;  // C_1 / C_2 at init (NaN when undefined)
  double c_tilde = 0.0;
  double gen_error = 0.0;
  Branch branch = Branch::kUnresolved;
  double q1_distance = 0.0;
  double q2_distance = 0.0;
  bool recovered = false;
  StopReason stop_reason = StopReason::kMaxIters;
  double final_loss = 0.0;
  std::int64_t iters_used = 0;
  std::string error;  // non-empty when the cell could not run
};

// Deterministic order for emission: (config_id, n, data_seed, scale, init_seed, grid_index).
void sort_results(std::vector<SweepResult>& results);

std::vector<SweepResult> run_scale_sweep(const ExperimentConfig& cfg, const RunOptions& opts = {});
std::vector<SweepResult> run_ratio_sweep(const ExperimentConfig& cfg, const RunOptions& opts = {});
// Ratio sweep restricted to the uniform-cube protocol in d > 1.
std::vector<SweepResult> run_highdim_study(const ExperimentConfig& cfg, const RunOptions& opts = {});

// c-tilde grid with both endpoints exact.
Vec c_tilde_grid(std::size_t points);

// Imposes C_2 / C_1 = c_tilde on a two-neuron init; 0 zeroes neuron 2 and 1
// duplicates neuron 1 exactly.
NetworkParams impose_c_tilde(const NetworkParams& base, const GammaVector& g, double c_tilde);

struct BoundaryFit {
  bool defined = false;
  double c_tilde_boundary = 0.0;  // Q1 iff c_tilde >= boundary
  double lower = 0.0;             // |c| boundary below 1 (= c_tilde_boundary)
  double upper = 0.0;             // |c| boundary above 1 (= 1 / c_tilde_boundary)
  std::size_t misclassified = 0;
  std::size_t used = 0;
};

// Threshold on c_tilde that best separates Q1 (above) from Q2 (below); among
// equally good thresholds the midpoint of the widest gap.
BoundaryFit fit_branch_boundary(const std::vector<SweepResult>& results);

struct BranchStudy {
  std::vector<SweepResult> runs;
  std::vector<bool> converged;
  BoundaryFit fit;
};
BranchStudy run_branch_study(const ExperimentConfig& cfg, const RunOptions& opts = {});

struct AlignmentTrial {
  std::uint64_t seed = 0;
  double scale = 0.0;
  double alpha_eff = 0.0;  // |C(theta_0)|
  double c_ratio = 0.0;
  StopReason stop_reason = StopReason::kMaxIters;
  double final_loss = 0.0;
  AlignmentReport vs_reference;
};

struct AlignmentStudy {
  std::vector<AlignmentTrial> trials;  // sorted by descending scale; the last is the reference
  HessianSpectrum spectrum;
  // log(sup_distance) = slope log(scale) + intercept over non-reference trials
  double slope = 0.0;
  double intercept = 0.0;
  bool fit_defined = false;
  std::vector<Trajectory> runs;  // parallel to trials
};
AlignmentStudy run_alignment_study(const ExperimentConfig& cfg, const RunOptions& opts = {});

struct NeuronReport {
  std::size_t width = 0;
  std::size_t neuron = 0;
  double abs_c = 0.0;
  double terminal_norm = 0.0;
};

struct WidthRun {
  std::size_t width = 0;
  double gen_error = 0.0;
  double final_loss = 0.0;
  StopReason stop_reason = StopReason::kMaxIters;
  std::int64_t iters_used = 0;
  std::size_t argmax_c = 0;
  std::size_t argmax_c_rank = 0;  // 0-based rank of that neuron by terminal norm
  std::vector<NeuronReport> neurons;
  Vec grid_x;
  Vec grid_output;
  Vec grid_target;
};
std::vector<WidthRun> run_width_study(const ExperimentConfig& cfg, const RunOptions& opts = {});

// Runs fn(i) for i in [0, count) on up to `threads` workers.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn);

// Ordinary least squares y = slope x + intercept.
std::pair<double, double> fit_line(const Vec& x, const Vec& y);

}  // namespace nrl
