#ifndef SWARMLEAK_H
#define SWARMLEAK_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every exported function.
typedef enum SlStatus {
  SL_STATUS_OK = 0,
  // Null pointer, bad UTF-8, or an out-of-range scalar argument.
  SL_STATUS_INVALID_ARGUMENT = 1,
  // Scenario JSON failed to parse or validate.
  SL_STATUS_CONFIG = 2,
  // The computation itself failed.
  SL_STATUS_RUNTIME = 3,
  // A Rust panic was caught at the boundary.
  SL_STATUS_PANIC = 4,
} SlStatus;

// Report of a finished run.
typedef struct SlReport SlReport;

// Parsed and validated scenario.
typedef struct SlScenario SlScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message of this thread into `buf` (NUL-terminated,
// truncated to `len`). Returns the full message length excluding the NUL,
// so a caller can size a second attempt.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
uintptr_t sl_last_error(char *buf, uintptr_t len);

// Parses and validates a scenario from JSON text. Relative dataset paths
// are resolved against the process working directory.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum SlStatus sl_scenario_from_json(const char *json, struct SlScenario **out);

// Loads a scenario file; relative paths inside resolve against its directory.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum SlStatus sl_scenario_from_path(const char *path, struct SlScenario **out);

// # Safety
// `scenario` must be null or a pointer from `sl_scenario_from_*` not yet freed.
void sl_scenario_free(struct SlScenario *scenario);

// Runs the full pipeline. Blocks until the run finishes.
//
// # Safety
// `scenario` must be a live handle; `out` must be writable.
enum SlStatus sl_run_scenario(const struct SlScenario *scenario, struct SlReport **out);

// Headline numbers of a report. Any output pointer may be null.
//
// # Safety
// `report` must be a live handle; non-null outputs must be writable.
enum SlStatus sl_report_metrics(const struct SlReport *report,
                                double *accuracy,
                                double *macro_f1,
                                double *baseline);

// Serializes the report. `canonical != 0` zeroes the wall clock so two runs
// of one scenario compare byte for byte. Free the string with
// [`sl_string_free`].
//
// # Safety
// `report` must be a live handle; `out` must be writable.
enum SlStatus sl_report_to_json(const struct SlReport *report, int32_t canonical, char **out);

// # Safety
// `report` must be null or a handle from [`sl_run_scenario`] not yet freed.
void sl_report_free(struct SlReport *report);

// # Safety
// `s` must be null or a string returned by this library not yet freed.
void sl_string_free(char *s);

// MMD between two row-major sets of probability vectors with `cols`
// entries each. `sigma <= 0` selects the median heuristic.
//
// # Safety
// `a` must hold `a_rows * cols` values, `b` must hold `b_rows * cols`, and
// `out` must be writable.
enum SlStatus sl_mmd(const double *a,
                     uintptr_t a_rows,
                     const double *b,
                     uintptr_t b_rows,
                     uintptr_t cols,
                     double sigma,
                     uint8_t kernel_exponent,
                     double *out);

// Shannon entropy (nats) of one probability vector.
//
// # Safety
// `probs` must hold `len` values; `out` must be writable.
enum SlStatus sl_prediction_entropy(const double *probs, uintptr_t len, double *out);

// Largest entry of one probability vector.
//
// # Safety
// `probs` must hold `len` values; `out` must be writable.
enum SlStatus sl_prediction_confidence(const double *probs, uintptr_t len, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SWARMLEAK_H */
