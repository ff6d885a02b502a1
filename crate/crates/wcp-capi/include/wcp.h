/* C ABI for the Webster curvature prescription toolkit (wcp-capi).
 *
 * Conventions:
 *   - fallible calls return wcp_status; results travel through
 *     out-pointers;
 *   - WcpK is an opaque curvature-polynomial handle
 *     (wcp_k_load / wcp_k_parse -> wcp_k_free);
 *   - JSON strings are heap-allocated and released by wcp_string_free;
 *   - wcp_last_error copies the most recent failure message of the
 *     calling thread.
 */

#ifndef WCP_H
#define WCP_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum wcp_status {
  WCP_OK = 0,
  /* Internal or numerical failure; message via wcp_last_error. */
  WCP_ERROR = 1,
  /* A hypothesis of the degree theorem failed (not Morse, vanishing
   * condition, degenerate least eigenvalue, nonpositive K). */
  WCP_HYPOTHESIS_FAILED = 2,
  WCP_NULL_ARGUMENT = 3,
  WCP_INVALID_UTF8 = 4,
} wcp_status;

/* Opaque curvature polynomial handle. */
typedef struct WcpK WcpK;

/* Copy the last error message of this thread into buf (NUL terminated,
 * truncated to cap); returns the full message length. buf may be NULL. */
size_t wcp_last_error(char *buf, size_t cap);

/* Load a curvature polynomial from a monomial-format file
 * ("c i j k l" per line, '#' comments). */
wcp_status wcp_k_load(const char *path, WcpK **out);

/* Parse a curvature polynomial from monomial-format text. */
wcp_status wcp_k_parse(const char *text, WcpK **out);

/* Release a curvature handle. NULL is a no-op. */
void wcp_k_free(WcpK *k);

/* Evaluate the polynomial at an ambient point of S^3 in R^4. */
wcp_status wcp_k_eval(const WcpK *k, double x1, double x2, double x3,
                      double x4, double *out);

/* Total degree report as a JSON string (free with wcp_string_free). */
wcp_status wcp_degree_json(const WcpK *k, uint64_t seed, char **out_json);

/* Total degree and existence verdict alone. */
wcp_status wcp_total_degree(const WcpK *k, uint64_t seed, int64_t *out_degree,
                            bool *out_existence);

/* The three exact bubble integrals (int U^3, int U^4, int (x^2+y^2) U^4)
 * at the given quadrature tolerance. */
wcp_status wcp_verify_integrals(double rel_tol, double *out_i3,
                                double *out_i4, double *out_iw);

/* Koranyi gauge norm of a Heisenberg point (x, y, t). */
double wcp_koranyi_norm(double x, double y, double t);

/* The Jerison-Lee profile U at a Heisenberg point. */
double wcp_bubble_u(double x, double y, double t);

/* Release a string returned by this library. NULL is a no-op. */
void wcp_string_free(char *s);

/* Run a CLI-style command ("verify-integrals", "degree", ...) and return
 * its JSON report. k_path may be NULL for commands that do not need a
 * curvature polynomial. */
wcp_status wcp_run_json(const char *command, const char *k_path,
                        uint64_t seed, char **out_json);

#ifdef __cplusplus
}
#endif

#endif /* WCP_H */
