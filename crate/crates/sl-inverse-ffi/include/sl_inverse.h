#ifndef SL_INVERSE_H
#define SL_INVERSE_H

/* Generated by cbindgen from the sl-inverse-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define SL_OK 0

#define SL_ERR_INPUT 2

#define SL_ERR_NUMERICAL 3

#define SL_ERR_ARGUMENT 4

// Opaque handle to a parsed problem description.
typedef struct SlProblem SlProblem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the most recent failure on this thread. The pointer stays
// valid until the next failing call on the same thread. Never null.
const char *sl_last_error(void);

// Parse a problem spec JSON into a handle. On success writes the handle
// to `out` and returns 0; the handle must be released with
// `sl_problem_free`.
//
// # Safety
// `json` must be a valid NUL-terminated string; `out` must be a valid
// pointer to a pointer slot.
int32_t sl_problem_from_json(const char *json, struct SlProblem **out);

// Release a handle returned by `sl_problem_from_json`. Null is ignored.
//
// # Safety
// `problem` must be null or a pointer previously returned by
// `sl_problem_from_json` that has not been freed.
void sl_problem_free(struct SlProblem *problem);

// Compute the first eigenvalues (counted with multiplicity) of problem
// B_i and write them into the caller-owned arrays `re`, `im` and
// `multiplicity`, each of capacity `capacity` entries. The number of
// distinct entries written goes to `written`.
//
// # Safety
// `problem` must be a live handle; the array pointers must reference at
// least `capacity` elements; `written` must be a valid pointer.
int32_t sl_spectrum(const struct SlProblem *problem,
                    uint8_t i,
                    size_t n_eigs,
                    double *re,
                    double *im,
                    uint32_t *multiplicity,
                    size_t capacity,
                    size_t *written);

// Reconstruct (q1, h) from known-data JSON and spectrum CSV text. On
// success writes a NUL-terminated result JSON (release it with
// `sl_string_free`). `modes` = 0 picks the default trial size; `reg` is
// the relative singular-value cutoff (pass a negative value for the
// default); `grid_n` = 0 picks the default grid.
//
// # Safety
// `known_json` and `spectrum_csv` must be valid NUL-terminated strings;
// `out_json` must be a valid pointer slot.
int32_t sl_invert(const char *known_json,
                  const char *spectrum_csv,
                  size_t modes,
                  double reg,
                  size_t grid_n,
                  char **out_json);

// Release a string returned by this library. Null is ignored.
//
// # Safety
// `s` must be null or a pointer returned by this library that has not
// been freed.
void sl_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SL_INVERSE_H */
