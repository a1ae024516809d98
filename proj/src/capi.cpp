#include "nrl/nrl.h"

#include <cmath>
#include <cstring>
#include <limits>
#include <memory>
#include <string>

#include "nrl/dynamics.hpp"
#include "nrl/error.hpp"
#include "nrl/geometry.hpp"
#include "nrl/io.hpp"
#include "nrl/rng.hpp"
#include "nrl/runner.hpp"
#include "nrl/spectral.hpp"
#include "nrl/verify.hpp"

#ifndef NRL_VERSION_STRING
#define NRL_VERSION_STRING "0.0.0"
#endif

struct nrl_target {
  nrl::TargetSpec spec;
};
struct nrl_dataset {
  nrl::Dataset data;
};
struct nrl_params {
  nrl::NetworkParams theta;
};
struct nrl_trajectory {
  nrl::Trajectory traj;
};

namespace {

thread_local std::string g_last_error;

nrl_status set_error(nrl_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

template <class F>
nrl_status guarded(F&& f) {
  g_last_error.clear();
  try {
    return f();
  } catch (const nrl::Error& e) {
    return set_error(static_cast<nrl_status>(static_cast<int>(e.code())), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(NRL_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(NRL_ERR_INTERNAL, e.what());
  }
}

void need(const void* p, const char* what) {
  if (p == nullptr) nrl::fail(nrl::ErrorCode::kInvalidInput, std::string(what) + " is NULL");
}

nrl::Activation act_of(const char* name) {
  need(name, "activation");
  return nrl::Activation::by_name(name);
}

nrl_stop_reason to_c(nrl::StopReason r) {
  switch (r) {
    case nrl::StopReason::kLossThreshold:
      return NRL_STOP_LOSS_THRESHOLD;
    case nrl::StopReason::kMaxIters:
      return NRL_STOP_MAX_ITERS;
    case nrl::StopReason::kDivergence:
      break;
  }
  return NRL_STOP_DIVERGENCE;
}

}  // namespace

extern "C" {

const char* nrl_version(void) { return NRL_VERSION_STRING; }

const char* nrl_status_string(nrl_status status) {
  switch (status) {
    case NRL_OK:
      return "ok";
    case NRL_ERR_INVALID_INPUT:
      return "invalid input";
    case NRL_ERR_ASSUMPTION:
      return "assumption violated";
    case NRL_ERR_INFEASIBLE_RESCALE:
      return "infeasible rescale";
    case NRL_ERR_CONFIG:
      return "config error";
    case NRL_ERR_IO:
      return "i/o error";
    case NRL_ERR_INTERNAL:
      return "internal error";
    case NRL_ERR_CELL_FAILED:
      return "cell failed";
  }
  return "unknown status";
}

const char* nrl_last_error(void) { return g_last_error.c_str(); }

nrl_status nrl_target_create(double a0, const double* w0, size_t d_aug, const char* activation, nrl_target** out) {
  return guarded([&] {
    need(w0, "w0");
    need(out, "out");
    *out = new nrl_target{nrl::TargetSpec(a0, nrl::Vec(w0, w0 + d_aug), act_of(activation))};
    return NRL_OK;
  });
}

void nrl_target_free(nrl_target* target) { delete target; }

nrl_status nrl_dataset_create(const nrl_target* target, const char* sampler, size_t n, size_t d, int bias, double lo,
                              double hi, uint64_t seed, nrl_dataset** out) {
  return guarded([&] {
    need(target, "target");
    need(sampler, "sampler");
    need(out, "out");
    nrl::SamplingPlan plan;
    plan.kind = nrl::sampling_kind_from_string(sampler);
    plan.n = n;
    plan.d = d;
    plan.bias = bias != 0;
    plan.lo = lo;
    plan.hi = hi;
    *out = new nrl_dataset{nrl::make_dataset(target->spec, plan, seed)};
    return NRL_OK;
  });
}

nrl_status nrl_dataset_from_points(size_t n, size_t d_aug, int bias, const double* x_aug, const double* y,
                                   nrl_dataset** out) {
  return guarded([&] {
    need(x_aug, "x_aug");
    need(y, "y");
    need(out, "out");
    *out = new nrl_dataset{nrl::Dataset(d_aug, bias != 0, nrl::Vec(x_aug, x_aug + n * d_aug), nrl::Vec(y, y + n))};
    return NRL_OK;
  });
}

nrl_status nrl_dataset_shape(const nrl_dataset* data, size_t* n, size_t* d_aug) {
  return guarded([&] {
    need(data, "data");
    if (n) *n = data->data.n();
    if (d_aug) *d_aug = data->data.d_aug();
    return NRL_OK;
  });
}

void nrl_dataset_free(nrl_dataset* data) { delete data; }

nrl_status nrl_params_create(size_t m, size_t d_aug, const double* flat, nrl_params** out) {
  return guarded([&] {
    need(out, "out");
    nrl::NetworkParams p(m, d_aug);
    if (flat) std::memcpy(p.flat().data(), flat, p.size() * sizeof(double));
    *out = new nrl_params{std::move(p)};
    return NRL_OK;
  });
}

nrl_status nrl_params_init_gaussian(size_t m, size_t d_aug, double scale, uint64_t seed, nrl_params** out) {
  return guarded([&] {
    need(out, "out");
    nrl::RngStream rng(seed, nrl::Stream::kInit);
    *out = new nrl_params{nrl::init_params(m, d_aug, scale, rng)};
    return NRL_OK;
  });
}

nrl_status nrl_params_shape(const nrl_params* params, size_t* m, size_t* d_aug) {
  return guarded([&] {
    need(params, "params");
    if (m) *m = params->theta.m();
    if (d_aug) *d_aug = params->theta.d_aug();
    return NRL_OK;
  });
}

nrl_status nrl_params_get(const nrl_params* params, double* out, size_t len) {
  return guarded([&] {
    need(params, "params");
    need(out, "out");
    nrl::require(len == params->theta.size(), nrl::ErrorCode::kInvalidInput,
                 "nrl_params_get: buffer length " + std::to_string(len) + ", need " +
                     std::to_string(params->theta.size()));
    std::memcpy(out, params->theta.flat().data(), len * sizeof(double));
    return NRL_OK;
  });
}

void nrl_params_free(nrl_params* params) { delete params; }

nrl_status nrl_forward(const nrl_params* params, const char* activation, const double* x_aug, size_t len,
                       double* out) {
  return guarded([&] {
    need(params, "params");
    need(x_aug, "x_aug");
    need(out, "out");
    nrl::require(len == params->theta.d_aug(), nrl::ErrorCode::kInvalidInput,
                 "nrl_forward: input length " + std::to_string(len) + ", need " +
                     std::to_string(params->theta.d_aug()));
    *out = nrl::forward(params->theta, act_of(activation), {x_aug, len});
    return NRL_OK;
  });
}

nrl_status nrl_loss(const nrl_params* params, const nrl_dataset* data, const char* activation, double* out) {
  return guarded([&] {
    need(params, "params");
    need(data, "data");
    need(out, "out");
    *out = nrl::loss(params->theta, data->data, act_of(activation));
    return NRL_OK;
  });
}

nrl_status nrl_gradient(const nrl_params* params, const nrl_dataset* data, const char* activation, double* out,
                        size_t len) {
  return guarded([&] {
    need(params, "params");
    need(data, "data");
    need(out, "out");
    nrl::require(len == params->theta.size(), nrl::ErrorCode::kInvalidInput, "nrl_gradient: wrong buffer length");
    const auto g = nrl::gradient(params->theta, data->data, act_of(activation));
    std::memcpy(out, g.data(), len * sizeof(double));
    return NRL_OK;
  });
}

nrl_status nrl_gamma(const nrl_dataset* data, double* gamma, size_t len, double* norm) {
  return guarded([&] {
    need(data, "data");
    const auto g = nrl::compute_gamma(data->data);
    if (gamma) {
      nrl::require(len == g.gamma.size(), nrl::ErrorCode::kInvalidInput, "nrl_gamma: wrong buffer length");
      std::memcpy(gamma, g.gamma.data(), len * sizeof(double));
    }
    if (norm) *norm = g.norm;
    return NRL_OK;
  });
}

nrl_status nrl_neuron_scales(const nrl_params* params, const nrl_dataset* data, double* c, size_t m,
                             double* c_tilde) {
  return guarded([&] {
    need(params, "params");
    need(data, "data");
    const auto s = nrl::neuron_scales(params->theta, nrl::compute_gamma(data->data));
    if (c) {
      nrl::require(m == s.c.size(), nrl::ErrorCode::kInvalidInput, "nrl_neuron_scales: wrong buffer length");
      std::memcpy(c, s.c.data(), m * sizeof(double));
    }
    if (c_tilde) *c_tilde = s.c_tilde ? *s.c_tilde : std::numeric_limits<double>::quiet_NaN();
    return NRL_OK;
  });
}

nrl_status nrl_rescale_to_ratio(const nrl_params* params, const nrl_dataset* data, const double* ratios, size_t m,
                                nrl_params** out) {
  return guarded([&] {
    need(params, "params");
    need(data, "data");
    need(ratios, "ratios");
    need(out, "out");
    *out = new nrl_params{
        nrl::rescale_to_ratio(params->theta, nrl::compute_gamma(data->data), nrl::Vec(ratios, ratios + m))};
    return NRL_OK;
  });
}

nrl_status nrl_hessian_spectrum(const nrl_dataset* data, const char* activation, size_t m, nrl_spectrum* out) {
  return guarded([&] {
    need(data, "data");
    need(out, "out");
    const auto h = nrl::hessian_at_origin(data->data, act_of(activation), m);
    *out = nrl_spectrum{h.spectrum.mu1, h.spectrum.mu2, h.spectrum.top_eigenspace_dim, h.spectrum.rate_exponent};
    return NRL_OK;
  });
}

void nrl_train_config_default(nrl_train_config* cfg) {
  if (!cfg) return;
  const nrl::TrainConfig d;
  *cfg = nrl_train_config{d.learning_rate, d.max_iters, d.stop_loss, d.record_stride, d.record_budget};
}

nrl_status nrl_train(const nrl_params* theta0, const nrl_dataset* data, const char* activation,
                     const nrl_train_config* cfg, nrl_trajectory** out) {
  return guarded([&] {
    need(theta0, "theta0");
    need(data, "data");
    need(cfg, "cfg");
    need(out, "out");
    nrl::TrainConfig tc;
    tc.learning_rate = cfg->learning_rate;
    tc.max_iters = cfg->max_iters;
    tc.stop_loss = cfg->stop_loss;
    tc.record_stride = cfg->record_stride;
    tc.record_budget = cfg->record_budget;
    *out = new nrl_trajectory{nrl::train(theta0->theta, data->data, act_of(activation), tc)};
    return NRL_OK;
  });
}

nrl_status nrl_trajectory_info_get(const nrl_trajectory* traj, nrl_trajectory_info* out) {
  return guarded([&] {
    need(traj, "traj");
    need(out, "out");
    const auto& t = traj->traj;
    *out = nrl_trajectory_info{t.snapshots.size(), t.terminal.iter, t.terminal.loss, to_c(t.stop_reason)};
    return NRL_OK;
  });
}

nrl_status nrl_trajectory_state(const nrl_trajectory* traj, size_t index, nrl_params** out) {
  return guarded([&] {
    need(traj, "traj");
    need(out, "out");
    const auto& t = traj->traj;
    nrl::require(index <= t.snapshots.size(), nrl::ErrorCode::kInvalidInput,
                 "nrl_trajectory_state: index " + std::to_string(index) + " out of range");
    *out = new nrl_params{index == t.snapshots.size() ? t.terminal.theta : t.snapshots[index].theta};
    return NRL_OK;
  });
}

nrl_status nrl_trajectory_save(const nrl_trajectory* traj, const char* path) {
  return guarded([&] {
    need(traj, "traj");
    need(path, "path");
    nrl::save_trajectory(traj->traj, path);
    return NRL_OK;
  });
}

nrl_status nrl_trajectory_load(const char* path, size_t d_aug, nrl_trajectory** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new nrl_trajectory{nrl::load_trajectory(path, d_aug)};
    return NRL_OK;
  });
}

void nrl_trajectory_free(nrl_trajectory* traj) { delete traj; }

nrl_status nrl_classify(const nrl_params* params, const nrl_target* target, double tol, nrl_branch_report* out) {
  return guarded([&] {
    need(params, "params");
    need(target, "target");
    need(out, "out");
    const auto d = nrl::branch_distances(params->theta, target->spec, tol);
    const auto b = nrl::classify(params->theta, target->spec, tol);
    out->branch = b == nrl::Branch::kQ1 ? NRL_BRANCH_Q1 : b == nrl::Branch::kQ2 ? NRL_BRANCH_Q2 : NRL_BRANCH_UNRESOLVED;
    out->q1_distance = d.q1;
    out->q2_distance = d.q2;
    out->q2_boundary = d.q2_boundary ? 1 : 0;
    return NRL_OK;
  });
}

nrl_status nrl_generalization_error(const nrl_params* params, const nrl_target* target, const char* eval_kind,
                                    size_t points, double lo, double hi, uint64_t seed, double* out) {
  return guarded([&] {
    need(params, "params");
    need(target, "target");
    need(eval_kind, "eval_kind");
    need(out, "out");
    nrl::EvalPlan plan;
    plan.kind = nrl::eval_kind_from_string(eval_kind);
    plan.points = points;
    plan.lo = lo;
    plan.hi = hi;
    plan.seed = seed;
    *out = nrl::generalization_error(params->theta, target->spec, target->spec.activation, plan);
    return NRL_OK;
  });
}

nrl_status nrl_verify(const char* fault, nrl_check_callback cb, void* user, int* all_passed) {
  return guarded([&] {
    nrl::VerifyOptions opts;
    if (fault != nullptr) {
      nrl::require(std::strcmp(fault, "gradient-sign") == 0, nrl::ErrorCode::kInvalidInput,
                   std::string("unknown fault '") + fault + "'");
      opts.gradient_under_test = [](const nrl::NetworkParams& t, const nrl::Dataset& d, const nrl::Activation& a) {
        auto g = nrl::gradient(t, d, a);
        for (double& v : g) v = -v;
        return g;
      };
    }
    const auto results = nrl::run_verify(opts, [&](const nrl::CheckResult& r) {
      if (cb) cb(r.name.c_str(), r.passed ? 1 : 0, r.measured, r.tolerance, r.detail.c_str(), user);
    });
    bool ok = true;
    for (const auto& r : results) ok = ok && r.passed;
    if (all_passed) *all_passed = ok ? 1 : 0;
    return NRL_OK;
  });
}

nrl_status nrl_run_config(const char* config_path, const char* out_dir, const nrl_run_options* opts,
                          nrl_log_callback log, void* user) {
  return guarded([&] {
    need(config_path, "config_path");
    need(out_dir, "out_dir");
    nrl::RunOptions ro;
    bool full = false;
    if (opts) {
      ro.threads = opts->threads;
      ro.seed_offset = opts->seed_offset;
      full = opts->paper_scale != 0;
    }
    const auto cfg = nrl::load_run_config(config_path, full);
    nrl::LogFn fn;
    if (log) fn = [&](const std::string& line) { log(line.c_str(), user); };
    const auto report = nrl::run_experiments(cfg, config_path, out_dir, ro, fn);
    if (report.any_error()) {
      std::string msg = std::to_string(report.errored_cells) + " cells errored";
      for (const auto& e : report.experiments)
        if (e.status.rfind("error", 0) == 0) msg += "; " + e.id + ": " + e.status;
      return set_error(NRL_ERR_CELL_FAILED, msg);
    }
    return NRL_OK;
  });
}

}  // extern "C"
