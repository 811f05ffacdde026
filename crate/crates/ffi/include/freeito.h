#ifndef FREEITO_H
#define FREEITO_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes; `FREEITO_STATUS_OK` is zero.
 */
typedef enum FreeitoStatus {
  FREEITO_STATUS_OK = 0,
  FREEITO_STATUS_NULL_POINTER = 1,
  FREEITO_STATUS_INVALID_UTF8 = 2,
  FREEITO_STATUS_VALIDATION = 3,
  FREEITO_STATUS_SIZE = 4,
  FREEITO_STATUS_TRUNCATION = 5,
  FREEITO_STATUS_DOMAIN = 6,
  FREEITO_STATUS_REGIME = 7,
  FREEITO_STATUS_NUMERICAL = 8,
  FREEITO_STATUS_CALIBRATION = 9,
  FREEITO_STATUS_DIMENSION = 10,
  FREEITO_STATUS_CONTRACT = 11,
  FREEITO_STATUS_PARSE = 12,
  FREEITO_STATUS_PANIC = 13,
} FreeitoStatus;

/**
 * A free cumulant sequence.
 */
typedef struct FreeitoCumulants FreeitoCumulants;

/**
 * A compactly supported step function.
 */
typedef struct FreeitoStepFunction FreeitoStepFunction;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *freeito_last_error(void);

/**
 * Library version as a static string.
 */
const char *freeito_version(void);

/**
 * # Safety
 * `s` is null or was returned by this library and not yet freed.
 */
void freeito_string_free(char *s);

/**
 * `|NC(n)|`, the Catalan number `C_n`, by enumeration.
 *
 * # Safety
 * `out` is valid for a write.
 */
enum FreeitoStatus freeito_count_noncrossing(size_t n, uint64_t *out);

/**
 * Catalog law by name (`semicircular`, `free_poisson:<rate>`, ...), truncated at `order`.
 *
 * # Safety
 * `name` is a NUL-terminated string; `out` is valid for a write.
 */
enum FreeitoStatus freeito_cumulants_catalog(const char *name,
                                             size_t order,
                                             struct FreeitoCumulants **out);

/**
 * Cumulant sequence from JSON `{"kind": ..., "values": ["p/q", ...]}`.
 *
 * # Safety
 * `json` is a NUL-terminated string; `out` is valid for a write.
 */
enum FreeitoStatus freeito_cumulants_from_json(const char *json, struct FreeitoCumulants **out);

/**
 * # Safety
 * `r` is null or a live handle from this library.
 */
void freeito_cumulants_free(struct FreeitoCumulants *r);

/**
 * Moments `m_1..m_n` as doubles into `out[0..n]`.
 *
 * # Safety
 * `r` is a live handle; `out` has room for `n` doubles.
 */
enum FreeitoStatus freeito_moments(const struct FreeitoCumulants *r, size_t n, double *out);

/**
 * Exact moments `m_1..m_n` as a JSON array of `"p/q"` strings; free the
 * result with [`freeito_string_free`].
 *
 * # Safety
 * `r` is a live handle; `out` is valid for a write.
 */
enum FreeitoStatus freeito_moments_exact(const struct FreeitoCumulants *r, size_t n, char **out);

/**
 * Density of `mu_t` at `x` by Stieltjes inversion at height `eps`.
 *
 * # Safety
 * `r` is a live handle; `out` is valid for a write.
 */
enum FreeitoStatus freeito_density(const struct FreeitoCumulants *r,
                                   double t,
                                   double x,
                                   double eps,
                                   double *out);

/**
 * Cauchy transform `G(z)` of the law, written as `out[0] + i out[1]`.
 *
 * # Safety
 * `r` is a live handle; `out` has room for 2 doubles.
 */
enum FreeitoStatus freeito_cauchy(const struct FreeitoCumulants *r,
                                  double re,
                                  double im,
                                  double *out);

/**
 * Step function from JSON `{"breakpoints": [...], "values": [...]}`.
 *
 * # Safety
 * `json` is a NUL-terminated string; `out` is valid for a write.
 */
enum FreeitoStatus freeito_step_from_json(const char *json, struct FreeitoStepFunction **out);

/**
 * # Safety
 * `f` is null or a live handle from this library.
 */
void freeito_step_free(struct FreeitoStepFunction *f);

/**
 * `||f||_{n,mu}`.
 *
 * # Safety
 * `f` and `r` are live handles; `out` is valid for a write.
 */
enum FreeitoStatus freeito_mu_norm(const struct FreeitoStepFunction *f,
                                   const struct FreeitoCumulants *r,
                                   size_t n,
                                   double *out);

/**
 * Runs a named check on a config in the CLI `verify` format. The report
 * JSON goes to `report` (free with [`freeito_string_free`]) and the verdict
 * to `pass`.
 *
 * # Safety
 * `check` and `config` are NUL-terminated strings; `report` and `pass` are
 * valid for writes.
 */
enum FreeitoStatus freeito_verify(const char *check, const char *config, char **report, bool *pass);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FREEITO_H */
