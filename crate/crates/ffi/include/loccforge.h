#ifndef LOCCFORGE_H
#define LOCCFORGE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum LfStatus {
  LF_STATUS_OK = 0,
  LF_STATUS_NULL_POINTER = 1,
  LF_STATUS_INVALID_ARGUMENT = 2,
  LF_STATUS_CONFIG = 3,
  LF_STATUS_DIMENSION = 4,
  LF_STATUS_NUMERICAL = 5,
  LF_STATUS_INFEASIBLE = 6,
  LF_STATUS_IO = 7,
  LF_STATUS_DOCUMENT = 8,
  LF_STATUS_PANIC = 9,
} LfStatus;

/**
 * Optimization termination reason.
 */
typedef enum LfOptimStatus {
  LF_OPTIM_STATUS_CONVERGED = 0,
  LF_OPTIM_STATUS_MAX_ITERS = 1,
  LF_OPTIM_STATUS_LINE_SEARCH_FAILED = 2,
} LfOptimStatus;

/**
 * An objective built from an experiment configuration.
 */
typedef struct LfObjective LfObjective;

/**
 * Outcome of an optimization.
 */
typedef struct LfResult LfResult;

/**
 * Gradient-descent settings; see [`lf_optim_options_default`].
 */
typedef struct LfOptimOptions {
  size_t max_iters;
  double grad_tol;
  double armijo_c;
  double backtrack_factor;
  double init_step;
  size_t restarts;
  uint64_t seed;
} LfOptimOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length, 0 if none.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t lf_last_error(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *lf_version(void);

struct LfOptimOptions lf_optim_options_default(void);

/**
 * Builds the objective of grid point `point` (or merging sample `sample`)
 * of an experiment configuration given as TOML text.
 *
 * # Safety
 * `config_toml` must be a NUL-terminated string; `out` must be writable.
 */
enum LfStatus lf_objective_from_toml(const char *config_toml,
                                     size_t point,
                                     size_t sample,
                                     struct LfObjective **out);

/**
 * # Safety
 * `obj` must be null or a handle from [`lf_objective_from_toml`] not yet freed.
 */
void lf_objective_free(struct LfObjective *obj);

/**
 * Optimizer settings stored in the configuration the objective came from.
 *
 * # Safety
 * `obj` must be a live handle; `out` must be writable.
 */
enum LfStatus lf_objective_options(const struct LfObjective *obj, struct LfOptimOptions *out);

/**
 * Number of Stiefel factors in the protocol parameterization.
 *
 * # Safety
 * `obj` must be a live handle; `out` must be writable.
 */
enum LfStatus lf_objective_num_parts(const struct LfObjective *obj, size_t *out);

/**
 * Objective value at the identity protocol.
 *
 * # Safety
 * `obj` must be a live handle; `out` must be writable.
 */
enum LfStatus lf_objective_identity_value(const struct LfObjective *obj, double *out);

/**
 * Evaluates a protocol document (JSON) against the objective. The document
 * must describe the same protocol layout.
 *
 * # Safety
 * `obj` must be a live handle, `protocol_json` NUL-terminated, `out` writable.
 */
enum LfStatus lf_objective_evaluate_json(const struct LfObjective *obj,
                                         const char *protocol_json,
                                         double *out);

/**
 * Maximizes the objective with multi-restart gradient descent.
 *
 * # Safety
 * `obj` must be a live handle, `opts` null (use the configuration's
 * settings) or readable, `out` writable.
 */
enum LfStatus lf_objective_optimize(const struct LfObjective *obj,
                                    const struct LfOptimOptions *opts,
                                    struct LfResult **out);

/**
 * # Safety
 * `res` must be null or a handle from [`lf_objective_optimize`] not yet freed.
 */
void lf_result_free(struct LfResult *res);

/**
 * Best objective value.
 *
 * # Safety
 * `res` must be a live handle; `out` must be writable.
 */
enum LfStatus lf_result_value(const struct LfResult *res, double *out);

/**
 * Probability of the selected branch; writes -1 for averaged objectives.
 *
 * # Safety
 * `res` must be a live handle; `out` must be writable.
 */
enum LfStatus lf_result_success_probability(const struct LfResult *res, double *out);

/**
 * Termination reason and iteration count of the best restart.
 *
 * # Safety
 * `res` must be a live handle; outputs must be writable.
 */
enum LfStatus lf_result_status(const struct LfResult *res,
                               enum LfOptimStatus *status,
                               size_t *iterations);

/**
 * The optimized protocol as a JSON document, valid while `res` lives.
 *
 * # Safety
 * `res` must be a live handle.
 */
const char *lf_result_protocol_json(const struct LfResult *res);

/**
 * PPT upper bound on the average fidelity with the `d`-dimensional maximally
 * entangled state, for a state on `A ⊗ B`.
 *
 * # Safety
 * `re` (and `im` unless null) must hold `(dim_a·dim_b)²` values; `out` writable.
 */
enum LfStatus lf_ppt_avg_fidelity_bound(const double *re,
                                        const double *im,
                                        size_t dim_a,
                                        size_t dim_b,
                                        size_t d,
                                        double *out);

/**
 * PPT upper bound on the fidelity reached with success probability `p`.
 *
 * # Safety
 * As [`lf_ppt_avg_fidelity_bound`].
 */
enum LfStatus lf_ppt_fidelity_bound(const double *re,
                                    const double *im,
                                    size_t dim_a,
                                    size_t dim_b,
                                    size_t d,
                                    double p,
                                    double *out);

/**
 * PPT upper bound on the merging fidelity of a three-qubit pure state
 * `ψ_RAB` (8 amplitudes).
 *
 * # Safety
 * `re` (and `im` unless null) must hold 8 values; `out` writable.
 */
enum LfStatus lf_ppt_merging_bound(const double *re, const double *im, double *out);

/**
 * Von Neumann entropy in bits of a normalized density matrix.
 *
 * # Safety
 * `re` (and `im` unless null) must hold `dim²` values; `out` writable.
 */
enum LfStatus lf_entropy(const double *re, const double *im, size_t dim, double *out);

/**
 * Coherent information `I(A⟩B) = S(B) − S(AB)` in bits.
 *
 * # Safety
 * As [`lf_ppt_avg_fidelity_bound`].
 */
enum LfStatus lf_coherent_information(const double *re,
                                      const double *im,
                                      size_t dim_a,
                                      size_t dim_b,
                                      double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LOCCFORGE_H */
