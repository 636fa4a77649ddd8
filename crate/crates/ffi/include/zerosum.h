#ifndef ZEROSUM_H
#define ZEROSUM_H

/* Generated by cbindgen from crates/ffi. Do not edit by hand. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum ZsStatus {
  ZS_STATUS_OK = 0,
  ZS_STATUS_NULL_POINTER = 1,
  ZS_STATUS_SHARES = 2,
  ZS_STATUS_DIMENSION = 3,
  ZS_STATUS_COVARIANCE = 4,
  ZS_STATUS_VALUE = 5,
  ZS_STATUS_INDEX = 6,
  ZS_STATUS_PARSE = 7,
  ZS_STATUS_BUFFER_SIZE = 8,
  ZS_STATUS_NUMERICAL = 9,
  ZS_STATUS_FACTORIZATION = 10,
  ZS_STATUS_SEARCH_EXHAUSTED = 11,
  ZS_STATUS_INTERNAL = 12,
} ZsStatus;

typedef enum ZsDistribution {
  ZS_DISTRIBUTION_NORMAL = 0,
  ZS_DISTRIBUTION_SHIFTED_EXP = 1,
} ZsDistribution;

/**
 * Opaque validated scenario.
 */
typedef struct ZsScenario ZsScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *zs_last_error(void);

/**
 * Builds a scenario from `n` shares and the `(n-1) x (n-1)` base covariance.
 * `means` (length `n-1`) may be NULL for zero means. `focal_index < 0`
 * selects the last plan.
 */
enum ZsStatus zs_scenario_new(const double *shares,
                              size_t n,
                              const double *lambda,
                              const double *means,
                              ptrdiff_t focal_index,
                              struct ZsScenario **out);

/**
 * Parses and validates a NUL-terminated scenario JSON document.
 */
enum ZsStatus zs_scenario_from_json(const char *json, struct ZsScenario **out);

/**
 * Releases a scenario. NULL is ignored.
 */
void zs_scenario_free(struct ZsScenario *sc);

/**
 * Number of plans, or 0 for NULL.
 */
size_t zs_scenario_plan_count(const struct ZsScenario *sc);

enum ZsStatus zs_implied_mean(const struct ZsScenario *sc, double *out);

enum ZsStatus zs_focal_variance(const struct ZsScenario *sc, double *out);

/**
 * Writes the `n-1` covariances between non-focal plans and the focal plan.
 */
enum ZsStatus zs_cross_covariances(const struct ZsScenario *sc, double *out, size_t len);

/**
 * Writes the full `n x n` covariance, row-major, into `out` (`len >= n*n`).
 */
enum ZsStatus zs_full_covariance(const struct ZsScenario *sc, double *out, size_t len);

/**
 * Gradient of the focal variance and per-plan slack, each of length `n-1`.
 */
enum ZsStatus zs_focal_variance_gradient(const struct ZsScenario *sc,
                                         double *gradient,
                                         double *slack,
                                         size_t len,
                                         bool *prop2_satisfied);

/**
 * Effective caps for `n` nominal caps; `binding` receives 0/1 flags.
 */
enum ZsStatus zs_effective_caps(const struct ZsScenario *sc,
                                const double *nominal,
                                size_t len,
                                double *effective,
                                bool *binding);

/**
 * Monte Carlo summary: empirical means (`n`), covariance (`n*n`, row-major)
 * and the largest relative zero-sum violation over all draws. `dist` is a
 * `ZsDistribution` value.
 */
enum ZsStatus zs_simulate(const struct ZsScenario *sc,
                          uint64_t draws,
                          uint64_t seed,
                          uint32_t dist,
                          double *means,
                          size_t means_len,
                          double *covariance,
                          size_t covariance_len,
                          double *max_violation);

/**
 * Full analysis report as a JSON string; release with `zs_string_free`.
 */
enum ZsStatus zs_analyze_json(const struct ZsScenario *sc, char **out);

void zs_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ZEROSUM_H */
