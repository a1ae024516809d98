#ifndef NRL_H
#define NRL_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define NRL_API __declspec(dllexport)
#else
#define NRL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum nrl_status {
  NRL_OK = 0,
  NRL_ERR_INVALID_INPUT = 1,
  NRL_ERR_ASSUMPTION = 2,
  NRL_ERR_INFEASIBLE_RESCALE = 3,
  NRL_ERR_CONFIG = 4,
  NRL_ERR_IO = 5,
  NRL_ERR_INTERNAL = 6,
  NRL_ERR_CELL_FAILED = 7
} nrl_status;

typedef enum nrl_branch { NRL_BRANCH_Q1 = 0, NRL_BRANCH_Q2 = 1, NRL_BRANCH_UNRESOLVED = 2 } nrl_branch;

typedef enum nrl_stop_reason {
  NRL_STOP_LOSS_THRESHOLD = 0,
  NRL_STOP_MAX_ITERS = 1,
  NRL_STOP_DIVERGENCE = 2
} nrl_stop_reason;

typedef struct nrl_target nrl_target;
typedef struct nrl_dataset nrl_dataset;
typedef struct nrl_params nrl_params;
typedef struct nrl_trajectory nrl_trajectory;

NRL_API const char* nrl_version(void);
NRL_API const char* nrl_status_string(nrl_status status);
/* Message of the last failed call on this thread; "" if none. */
NRL_API const char* nrl_last_error(void);

/* activation: "tanh" or "x/(1+x^2)" */
NRL_API nrl_status nrl_target_create(double a0, const double* w0, size_t d_aug, const char* activation,
                                     nrl_target** out);
NRL_API void nrl_target_free(nrl_target* target);

/* sampler: "even", "gaussian" or "cube"; lo/hi bound the even grid and the cube. */
NRL_API nrl_status nrl_dataset_create(const nrl_target* target, const char* sampler, size_t n, size_t d, int bias,
                                      double lo, double hi, uint64_t seed, nrl_dataset** out);
/* x_aug is row-major n x d_aug. */
NRL_API nrl_status nrl_dataset_from_points(size_t n, size_t d_aug, int bias, const double* x_aug, const double* y,
                                           nrl_dataset** out);
NRL_API nrl_status nrl_dataset_shape(const nrl_dataset* data, size_t* n, size_t* d_aug);
NRL_API void nrl_dataset_free(nrl_dataset* data);

/* flat may be NULL for all zeros; otherwise m * (d_aug + 1) values, neuron-major (a, w). */
NRL_API nrl_status nrl_params_create(size_t m, size_t d_aug, const double* flat, nrl_params** out);
NRL_API nrl_status nrl_params_init_gaussian(size_t m, size_t d_aug, double scale, uint64_t seed, nrl_params** out);
NRL_API nrl_status nrl_params_shape(const nrl_params* params, size_t* m, size_t* d_aug);
NRL_API nrl_status nrl_params_get(const nrl_params* params, double* out, size_t len);
NRL_API void nrl_params_free(nrl_params* params);

NRL_API nrl_status nrl_forward(const nrl_params* params, const char* activation, const double* x_aug, size_t len,
                               double* out);
NRL_API nrl_status nrl_loss(const nrl_params* params, const nrl_dataset* data, const char* activation, double* out);
NRL_API nrl_status nrl_gradient(const nrl_params* params, const nrl_dataset* data, const char* activation,
                                double* out, size_t len);

NRL_API nrl_status nrl_gamma(const nrl_dataset* data, double* gamma, size_t len, double* norm);
/* c_tilde may be NULL; it is NaN when undefined (m != 2). */
NRL_API nrl_status nrl_neuron_scales(const nrl_params* params, const nrl_dataset* data, double* c, size_t m,
                                     double* c_tilde);
NRL_API nrl_status nrl_rescale_to_ratio(const nrl_params* params, const nrl_dataset* data, const double* ratios,
                                        size_t m, nrl_params** out);

typedef struct nrl_spectrum {
  double mu1;
  double mu2;
  size_t top_eigenspace_dim;
  double rate_exponent;
} nrl_spectrum;

NRL_API nrl_status nrl_hessian_spectrum(const nrl_dataset* data, const char* activation, size_t m, nrl_spectrum* out);

typedef struct nrl_train_config {
  double learning_rate;
  int64_t max_iters;
  double stop_loss;
  int64_t record_stride;
  size_t record_budget;
} nrl_train_config;

NRL_API void nrl_train_config_default(nrl_train_config* cfg);
NRL_API nrl_status nrl_train(const nrl_params* theta0, const nrl_dataset* data, const char* activation,
                             const nrl_train_config* cfg, nrl_trajectory** out);

typedef struct nrl_trajectory_info {
  size_t snapshots;
  int64_t terminal_iter;
  double terminal_loss;
  nrl_stop_reason stop_reason;
} nrl_trajectory_info;

NRL_API nrl_status nrl_trajectory_info_get(const nrl_trajectory* traj, nrl_trajectory_info* out);
/* index == snapshots returns the terminal state. */
NRL_API nrl_status nrl_trajectory_state(const nrl_trajectory* traj, size_t index, nrl_params** out);
NRL_API nrl_status nrl_trajectory_save(const nrl_trajectory* traj, const char* path);
NRL_API nrl_status nrl_trajectory_load(const char* path, size_t d_aug, nrl_trajectory** out);
NRL_API void nrl_trajectory_free(nrl_trajectory* traj);

typedef struct nrl_branch_report {
  nrl_branch branch;
  double q1_distance;
  double q2_distance;
  int q2_boundary;
} nrl_branch_report;

NRL_API nrl_status nrl_classify(const nrl_params* params, const nrl_target* target, double tol,
                                nrl_branch_report* out);

/* eval_kind: "grid", "gaussian" or "cube" */
NRL_API nrl_status nrl_generalization_error(const nrl_params* params, const nrl_target* target,
                                            const char* eval_kind, size_t points, double lo, double hi,
                                            uint64_t seed, double* out);

typedef void (*nrl_check_callback)(const char* name, int passed, double measured, double tolerance,
                                   const char* detail, void* user);

/* fault: NULL for none, or "gradient-sign" to flip the analytic gradient under test. */
NRL_API nrl_status nrl_verify(const char* fault, nrl_check_callback cb, void* user, int* all_passed);

typedef struct nrl_run_options {
  unsigned threads; /* 0: machine parallelism */
  int paper_scale;
  int64_t seed_offset;
} nrl_run_options;

typedef void (*nrl_log_callback)(const char* line, void* user);

/* NRL_ERR_CONFIG for unreadable or invalid configs, NRL_ERR_CELL_FAILED when
   any cell errored (outputs are still written). */
NRL_API nrl_status nrl_run_config(const char* config_path, const char* out_dir, const nrl_run_options* opts,
                                  nrl_log_callback log, void* user);

#ifdef __cplusplus
}
#endif

#endif
