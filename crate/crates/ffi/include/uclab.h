#ifndef UCLAB_H
#define UCLAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum UclabStatus {
  UCLAB_STATUS_OK = 0,
  UCLAB_STATUS_NULL_POINTER = 1,
  UCLAB_STATUS_DOMAIN = 2,
  UCLAB_STATUS_INVALID_INPUT = 3,
  UCLAB_STATUS_TOO_LARGE = 4,
  UCLAB_STATUS_DEGENERATE = 5,
  UCLAB_STATUS_NOT_UNION_CLOSED = 6,
  UCLAB_STATUS_SOLVER = 7,
  UCLAB_STATUS_PANIC = 8,
} UclabStatus;

/**
 * Opaque family of subsets of `[n]`.
 */
typedef struct UclabFamily UclabFamily;

/**
 * Opaque finitely supported probability measure on [0, 1].
 */
typedef struct UclabMeasure UclabMeasure;

/**
 * Opaque explicit distribution over subsets of `[n]`.
 */
typedef struct UclabSetDist UclabSetDist;

typedef struct UclabCounterexampleParams {
  double u_bar;
  double u;
  double d;
  double theta;
  uint64_t n;
  /**
   * Truncation index; 0 selects the default.
   */
  uint64_t k_max;
} UclabCounterexampleParams;

typedef struct UclabCounterexampleBounds {
  double marginal;
  bool admissible;
  double entropy_lower_bound;
  double union_entropy_upper_bound;
  double ratio_bound;
  double kl_upper_bound;
} UclabCounterexampleBounds;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Length in bytes of the last error message on this thread, excluding the
 * terminating NUL; 0 if the last call succeeded.
 */
size_t uclab_last_error_length(void);

/**
 * Copies the last error message into `buf` (truncated, always
 * NUL-terminated when `len > 0`) and returns its full length.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t uclab_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *uclab_version(void);

double uclab_golden_threshold(void);

/**
 * # Safety
 * `out` must be valid for a write.
 */
enum UclabStatus uclab_binary_entropy(double p, double *out);

/**
 * # Safety
 * `out` must be valid for a write.
 */
enum UclabStatus uclab_union_prob(double p, double q, double *out);

/**
 * # Safety
 * `out` must be valid for a write.
 */
enum UclabStatus uclab_lambda(double u, double *out);

/**
 * # Safety
 * `out` must be valid for a write.
 */
enum UclabStatus uclab_ratio_f(double s, double *out);

/**
 * # Safety
 * `out` must be valid for a write.
 */
enum UclabStatus uclab_coupled_union_prob(double p, double r, double *out);

/**
 * Builds a distribution from a dense table of `2^n` probabilities indexed by mask.
 *
 * # Safety
 * `probs` must point to `len` doubles; `out` must be valid for a write.
 */
enum UclabStatus uclab_set_dist_new(uint32_t n,
                                    const double *probs,
                                    size_t len,
                                    struct UclabSetDist **out);

/**
 * Parses the text format: `n=<size>` then `hexmask probability` lines.
 *
 * # Safety
 * `text` must be NUL-terminated; `out` must be valid for a write.
 */
enum UclabStatus uclab_set_dist_parse(const char *src, struct UclabSetDist **out);

/**
 * # Safety
 * `d` must be null or a handle not yet freed.
 */
void uclab_set_dist_free(struct UclabSetDist *d);

/**
 * # Safety
 * `d` must be a live handle; `out` valid for a write.
 */
enum UclabStatus uclab_set_dist_entropy(const struct UclabSetDist *d, double *out);

/**
 * `Pr[i ∈ A]` for 0-based element `i`.
 *
 * # Safety
 * `d` must be a live handle; `out` valid for a write.
 */
enum UclabStatus uclab_set_dist_marginal(const struct UclabSetDist *d, uint32_t i, double *out);

/**
 * Law of `A ∪ B` for independent `A ~ a`, `B ~ b`; the result is a new handle.
 *
 * # Safety
 * `a`, `b` must be live handles; `out` valid for a write.
 */
enum UclabStatus uclab_set_dist_union(const struct UclabSetDist *a,
                                      const struct UclabSetDist *b,
                                      struct UclabSetDist **out);

/**
 * `D(p || q)`; `+inf` when `p` is not absolutely continuous with respect to `q`.
 *
 * # Safety
 * `p`, `q` must be live handles; `out` valid for a write.
 */
enum UclabStatus uclab_kl_divergence(const struct UclabSetDist *p,
                                     const struct UclabSetDist *q,
                                     double *out);

/**
 * `H(A∪B) − λ(u)·H(A)` with `u` the largest marginal.
 *
 * # Safety
 * `d` must be a live handle; `out` valid for a write.
 */
enum UclabStatus uclab_theorem2_slack(const struct UclabSetDist *d, double *out);

/**
 * # Safety
 * `locations` and `weights` must point to `len` doubles; `out` valid for a write.
 */
enum UclabStatus uclab_measure_new(const double *locations,
                                   const double *weights,
                                   size_t len,
                                   struct UclabMeasure **out);

/**
 * # Safety
 * `m` must be null or a handle not yet freed.
 */
void uclab_measure_free(struct UclabMeasure *m);

/**
 * # Safety
 * `m` must be a live handle; `out` valid for a write.
 */
enum UclabStatus uclab_measure_mean(const struct UclabMeasure *m, double *out);

/**
 * `E[H(p+q−pq)] − λ·E[H(p)]`.
 *
 * # Safety
 * `m` must be a live handle; `out` valid for a write.
 */
enum UclabStatus uclab_measure_objective(const struct UclabMeasure *m, double lambda, double *out);

/**
 * Minimum of the expected coupled-union entropy over self-couplings.
 *
 * # Safety
 * `m` must be a live handle; `out` valid for a write.
 */
enum UclabStatus uclab_worst_coupling_value(const struct UclabMeasure *m, double *out);

/**
 * # Safety
 * `m` must be a live handle; `out` valid for a write.
 */
enum UclabStatus uclab_improved_slack(const struct UclabMeasure *m, double alpha, double *out);

/**
 * # Safety
 * `masks` must point to `len` values; `out` valid for a write.
 */
enum UclabStatus uclab_family_new(uint32_t n,
                                  const uint32_t *masks,
                                  size_t len,
                                  struct UclabFamily **out);

/**
 * Parses the text format: `n=<size>` then one hex mask per line.
 *
 * # Safety
 * `src` must be NUL-terminated; `out` valid for a write.
 */
enum UclabStatus uclab_family_parse(const char *src, struct UclabFamily **out);

/**
 * # Safety
 * `f` must be null or a handle not yet freed.
 */
void uclab_family_free(struct UclabFamily *f);

/**
 * # Safety
 * `f` must be a live handle; `out` valid for a write.
 */
enum UclabStatus uclab_family_is_union_closed(const struct UclabFamily *f, bool *out);

/**
 * Largest proportion of members containing a common element.
 *
 * # Safety
 * `f` must be a live handle; `out` valid for a write.
 */
enum UclabStatus uclab_family_best_proportion(const struct UclabFamily *f, double *out);

/**
 * Runs the greedy coupling DP and returns `H(A∪C)` and the largest deviation
 * of either marginal from uniform. `crossed` selects the crossed-prefix rates.
 *
 * # Safety
 * `f` must be a live handle; out-pointers valid for writes.
 */
enum UclabStatus uclab_greedy_coupling(const struct UclabFamily *f,
                                       bool crossed,
                                       double *h_union,
                                       double *max_deviation);

/**
 * Exhaustive check on `[n]`, `n ≤ 4`: smallest best-element proportion over
 * nontrivial union-closed families, and whether it reaches the golden threshold.
 *
 * # Safety
 * Out-pointers must be valid for writes.
 */
enum UclabStatus uclab_verify_theorem1(uint32_t n, double *min_proportion, bool *holds);

/**
 * # Safety
 * `params` must be readable; `out` valid for a write.
 */
enum UclabStatus uclab_counterexample_bounds(const struct UclabCounterexampleParams *params,
                                             struct UclabCounterexampleBounds *out);

/**
 * δ search with default grids; `delta` is 0 when no positive value survives.
 *
 * # Safety
 * Out-pointers must be valid for writes.
 */
enum UclabStatus uclab_delta_search(double alpha, uint64_t seed, double *delta, bool *certified);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* UCLAB_H */
