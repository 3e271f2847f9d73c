/* C interface of the projnull toolkit. Generated; do not edit. */

#ifndef PROJNULL_H
#define PROJNULL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes of every entry point.
 */
typedef enum PnStatus {
  PN_OK = 0,
  /**
   * A pointer argument was null.
   */
  PN_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  PN_BAD_UTF8 = 2,
  /**
   * The input document violated the schema; see `pn_last_error`.
   */
  PN_SCHEMA = 3,
  /**
   * The point has no Weyl nullity.
   */
  PN_EMPTY_KERNEL = 4,
  /**
   * Any other evaluation failure; see `pn_last_error`.
   */
  PN_EVALUATION = 5,
} PnStatus;

/**
 * An opaque parsed metric.
 */
typedef struct PnMetric PnMetric;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent error on this thread. The pointer stays
 * valid until the next failing call on the same thread; do not free it.
 */
const char *pn_last_error(void);

/**
 * Parses a metric-file JSON document into a handle.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum PnStatus pn_metric_parse_json(const char *json, struct PnMetric **out);

/**
 * Loads a builtin catalog metric (default parameters) into a handle.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum PnStatus pn_metric_from_catalog(const char *name, struct PnMetric **out);

/**
 * Frees a metric handle. A null handle is ignored.
 *
 * # Safety
 * `metric` must have come from this library and not be freed twice.
 */
void pn_metric_free(struct PnMetric *metric);

/**
 * Chart dimension of the metric; 0 for a null handle.
 *
 * # Safety
 * `metric` must be a live handle from this library, or null.
 */
uintptr_t pn_metric_dim(const struct PnMetric *metric);

/**
 * Weyl nullity at a chart point: writes the kernel dimension and the
 * eigenvalue B (the latter only when the kernel is nonempty).
 *
 * # Safety
 * `point` must hold `pn_metric_dim(metric)` doubles; the output pointers
 * must be valid.
 */
enum PnStatus pn_nullity_at(const struct PnMetric *metric,
                            const double *point,
                            uintptr_t *out_dim,
                            double *out_b);

/**
 * Runs a check suite from a configuration JSON document (the same schema
 * as `projnull run --config`) and returns the report as a JSON string in
 * `out_report`. Free the string with `pn_string_free`. `out_passed`
 * receives 1 when no check failed.
 *
 * # Safety
 * `config_json` must be a NUL-terminated string; the output pointers must
 * be valid.
 */
enum PnStatus pn_run_suite_json(const char *config_json, char **out_report, int32_t *out_passed);

/**
 * Frees a string returned by this library. A null pointer is ignored.
 *
 * # Safety
 * `s` must have come from this library and not be freed twice.
 */
void pn_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PROJNULL_H */
