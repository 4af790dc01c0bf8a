#ifndef HOLOTRANS_H
#define HOLOTRANS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes; the values match the CLI exit codes.
 */
typedef enum HtStatus {
  HT_STATUS_OK = 0,
  HT_STATUS_ERROR = 1,
  HT_STATUS_TRANSVERSALITY_FAILURE = 2,
  HT_STATUS_ORACLE_DISAGREEMENT = 3,
  HT_STATUS_CONFIG_ERROR = 4,
  HT_STATUS_NULL_POINTER = 5,
  HT_STATUS_INVALID_UTF8 = 6,
  HT_STATUS_PANIC = 7,
  HT_STATUS_NOT_AVAILABLE = 8,
} HtStatus;

/**
 * A validated run configuration.
 */
typedef struct HtConfig HtConfig;

/**
 * A completed run at one degree.
 */
typedef struct HtRecord HtRecord;

/**
 * A section on the torus.
 */
typedef struct HtSection HtSection;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failing call on this thread; empty if none. The
 * pointer stays valid until the next failing call on this thread.
 */
const char *ht_last_error(void);

/**
 * Release a string returned by this library.
 *
 * # Safety
 * `s` is null or was returned through a `char **` of this library.
 */
void ht_string_free(char *s);

/**
 * Parse a TOML configuration with dotted keys.
 *
 * # Safety
 * `toml` is a NUL-terminated string; `out` is writable.
 */
enum HtStatus ht_config_parse(const char *toml, struct HtConfig **out);

/**
 * Serialize a configuration back to TOML.
 *
 * # Safety
 * `cfg` is a live handle; `out` is writable.
 */
enum HtStatus ht_config_to_toml(const struct HtConfig *cfg, char **out);

/**
 * # Safety
 * `cfg` is null or a handle from [`ht_config_parse`], not used afterwards.
 */
void ht_config_free(struct HtConfig *cfg);

/**
 * Run the stratum induction at degree `k` from the zero section. The
 * returned status reflects the run itself; the record's verdict is read
 * with [`ht_record_verdict`].
 *
 * # Safety
 * `cfg` is a live handle; `out` is writable.
 */
enum HtStatus ht_run(const struct HtConfig *cfg, uint32_t k, struct HtRecord **out);

/**
 * `Ok`, `TransversalityFailure` or `OracleDisagreement`.
 *
 * # Safety
 * `rec` is a live handle.
 */
enum HtStatus ht_record_verdict(const struct HtRecord *rec);

/**
 * Signed zero count of a hypersurface run.
 *
 * # Safety
 * `rec` is a live handle; `out` is writable.
 */
enum HtStatus ht_record_zero_count(const struct HtRecord *rec, int32_t *out);

/**
 * Number of critical points of a pencil run.
 *
 * # Safety
 * `rec` is a live handle; `out` is writable.
 */
enum HtStatus ht_record_critical_count(const struct HtRecord *rec, int32_t *out);

/**
 * Number of strata carrying a margin report.
 *
 * # Safety
 * `rec` is a live handle; `out` is writable.
 */
enum HtStatus ht_record_stratum_count(const struct HtRecord *rec, size_t *out);

/**
 * Grid and certified margins of stratum `index`.
 *
 * # Safety
 * `rec` is a live handle; `eta_grid` and `eta_cert` are writable.
 */
enum HtStatus ht_record_margins(const struct HtRecord *rec,
                                size_t index,
                                double *eta_grid,
                                double *eta_cert);

/**
 * The full record as JSON.
 *
 * # Safety
 * `rec` is a live handle; `out` is writable.
 */
enum HtStatus ht_record_to_json(const struct HtRecord *rec, char **out);

/**
 * A copy of the record's final section.
 *
 * # Safety
 * `rec` is a live handle; `out` is writable.
 */
enum HtStatus ht_record_section(const struct HtRecord *rec, struct HtSection **out);

/**
 * # Safety
 * `rec` is null or a handle from [`ht_run`], not used afterwards.
 */
void ht_record_free(struct HtRecord *rec);

/**
 * # Safety
 * `json` is a NUL-terminated string; `out` is writable.
 */
enum HtStatus ht_section_from_json(const char *json, struct HtSection **out);

/**
 * # Safety
 * `s` is a live handle; `out` is writable.
 */
enum HtStatus ht_section_to_json(const struct HtSection *s, char **out);

/**
 * Value at the torus point `x` (length `2n`) written as interleaved
 * real and imaginary parts into `out` (length `2(m+1)`).
 *
 * # Safety
 * `s` is a live handle; `x` holds `x_len` doubles; `out` holds `out_len`.
 */
enum HtStatus ht_section_evaluate(const struct HtSection *s,
                                  const double *x,
                                  size_t x_len,
                                  double *out,
                                  size_t out_len);

/**
 * Re-measure a section under `cfg`; the measurement is returned as JSON
 * and its verdict as the status.
 *
 * # Safety
 * `s` and `cfg` are live handles; `out` is writable.
 */
enum HtStatus ht_measure(const struct HtSection *s, const struct HtConfig *cfg, char **out);

/**
 * # Safety
 * `s` is null or a section handle of this library, not used afterwards.
 */
void ht_section_free(struct HtSection *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HOLOTRANS_H */
