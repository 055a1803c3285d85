#ifndef PI01_H
#define PI01_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status of one report line.
typedef enum Pi01LineStatus {
  PI01_LINE_STATUS_PASS = 0,
  PI01_LINE_STATUS_FAIL = 1,
  PI01_LINE_STATUS_ERROR = 2,
} Pi01LineStatus;

// Result codes. `Ok` is zero; everything else is a failure.
typedef enum Pi01Status {
  PI01_STATUS_OK = 0,
  PI01_STATUS_NULL_ARGUMENT = 1,
  PI01_STATUS_INVALID_UTF8 = 2,
  PI01_STATUS_PARSE = 3,
  PI01_STATUS_UNKNOWN_COMMAND = 4,
  PI01_STATUS_UNKNOWN_NAME = 5,
  // The operation rejected its input (domain, precondition, shape, ...).
  PI01_STATUS_INVALID_INPUT = 6,
  // A size or depth budget was exceeded.
  PI01_STATUS_RESOURCE = 7,
  PI01_STATUS_INTERNAL = 8,
  PI01_STATUS_PANIC = 9,
  PI01_STATUS_INDEX_OUT_OF_RANGE = 10,
} Pi01Status;

// Report of one command.
typedef struct Pi01Report Pi01Report;

// Parsed scenario file.
typedef struct Pi01Scenario Pi01Scenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or an empty string.
// The pointer stays valid until the next call into this library.
const char *pi01_last_error(void);

// Library version as a static string.
const char *pi01_version(void);

// Parses scenario text into `*out`.
//
// # Safety
// `text` must be a NUL-terminated string and `out` a valid pointer.
enum Pi01Status pi01_scenario_parse(const char *text, struct Pi01Scenario **out);

// A scenario with no sections and seed 0.
struct Pi01Scenario *pi01_scenario_empty(void);

// Overrides the scenario seed.
//
// # Safety
// `sc` must be null or a live scenario handle.
enum Pi01Status pi01_scenario_set_seed(struct Pi01Scenario *sc, uint64_t seed);

// # Safety
// `sc` must be null or a handle from this library not yet freed.
void pi01_scenario_free(struct Pi01Scenario *sc);

// Runs `cmd` (for example `"check thin --tree T --sub S"`) and stores the
// report in `*out`. Failing checks still return `Ok`; inspect the report.
//
// # Safety
// `sc` must be a live scenario handle, `cmd` a NUL-terminated string and
// `out` a valid pointer.
enum Pi01Status pi01_run(const struct Pi01Scenario *sc, const char *cmd, struct Pi01Report **out);

// # Safety
// `r` must be null or a handle from this library not yet freed.
void pi01_report_free(struct Pi01Report *r);

// 1 when every line passed, 0 otherwise (including a null report).
//
// # Safety
// `r` must be null or a live report handle.
int32_t pi01_report_passed(const struct Pi01Report *r);

// Number of check lines, header excluded.
//
// # Safety
// `r` must be null or a live report handle.
size_t pi01_report_line_count(const struct Pi01Report *r);

// Status of line `i` in `*out`.
//
// # Safety
// `r` must be a live report handle and `out` a valid pointer.
enum Pi01Status pi01_report_line_status(const struct Pi01Report *r,
                                        size_t i,
                                        enum Pi01LineStatus *out);

// The full tab-separated report text; free with [`pi01_string_free`].
// Returns null for a null report.
//
// # Safety
// `r` must be null or a live report handle.
char *pi01_report_text(const struct Pi01Report *r);

// # Safety
// `s` must be null or a string returned by this library not yet freed.
void pi01_string_free(char *s);

// Self-delimiting code of `(n, m)` as a string of `0`/`1` (`e` when empty)
// in `*out`; free with [`pi01_string_free`].
//
// # Safety
// `out` must be a valid pointer.
enum Pi01Status pi01_selfdelim_encode(uint64_t n, uint64_t m, char **out);

// Inverse of [`pi01_selfdelim_encode`].
//
// # Safety
// `code` must be a NUL-terminated string; `n` and `m` valid pointers.
enum Pi01Status pi01_selfdelim_decode(const char *code, uint64_t *n, uint64_t *m);

// Number of colours `2^{i+1}` at bushiness index `i`; 0 if it overflows.
uint64_t pi01_ncol(uint32_t i);

// Successor count `κ_i(n)`; 0 if it overflows.
uint64_t pi01_kappa(uint32_t i, uint32_t n);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PI01_H */
