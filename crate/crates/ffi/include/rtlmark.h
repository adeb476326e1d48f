#ifndef RTLMARK_H
#define RTLMARK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RtlmarkStatus {
  RTLMARK_STATUS_OK = 0,
  RTLMARK_STATUS_NULL_ARGUMENT = 1,
  RTLMARK_STATUS_INVALID_UTF8 = 2,
  RTLMARK_STATUS_INVALID_KEY = 3,
  RTLMARK_STATUS_INVALID_ARGUMENT = 4,
  RTLMARK_STATUS_PARSE_ERROR = 5,
  RTLMARK_STATUS_INSUFFICIENT_CAPACITY = 6,
  RTLMARK_STATUS_EMBED_FAILED = 7,
  RTLMARK_STATUS_INTERNAL = 8,
} RtlmarkStatus;

/**
 * Opaque key handle.
 */
typedef struct RtlmarkKey RtlmarkKey;

/**
 * Opaque detection report handle.
 */
typedef struct RtlmarkReport RtlmarkReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer stays
 * valid until the next library call on the same thread.
 */
const char *rtlmark_last_error(void);

/**
 * Parse a hex-encoded key.
 *
 * # Safety
 * `hex` is a NUL-terminated string; `out` points to writable storage.
 */
enum RtlmarkStatus rtlmark_key_from_hex(const char *hex, struct RtlmarkKey **out);

/**
 * Generate a fresh random key.
 *
 * # Safety
 * `out` points to writable storage.
 */
enum RtlmarkStatus rtlmark_key_generate(struct RtlmarkKey **out);

/**
 * Hex encoding of the key secret; free with `rtlmark_string_free`.
 *
 * # Safety
 * `key` is a live handle.
 */
char *rtlmark_key_to_hex(const struct RtlmarkKey *key);

/**
 * Short public identifier of the key; free with `rtlmark_string_free`.
 *
 * # Safety
 * `key` is a live handle.
 */
char *rtlmark_key_id(const struct RtlmarkKey *key);

/**
 * # Safety
 * `key` is null or a handle from this library not yet freed.
 */
void rtlmark_key_free(struct RtlmarkKey *key);

/**
 * Watermark `source`. `tau` of 0 selects the default threshold. On success
 * `*out_source` receives the watermarked text.
 *
 * # Safety
 * `key` is a live handle; string arguments are NUL-terminated; `out_source`
 * points to writable storage.
 */
enum RtlmarkStatus rtlmark_embed(const struct RtlmarkKey *key,
                                 const char *source,
                                 const char *model,
                                 const char *developer,
                                 double tau,
                                 char **out_source);

/**
 * Score `source` under `key` with the default null model. `tau` of 0 selects
 * the default threshold. Unparsable input yields a clean report.
 *
 * # Safety
 * `key` is a live handle; `source` is NUL-terminated; `out` points to
 * writable storage.
 */
enum RtlmarkStatus rtlmark_detect(const struct RtlmarkKey *key,
                                  const char *source,
                                  double tau,
                                  struct RtlmarkReport **out);

/**
 * 1 watermarked, 0 clean, -1 for a null handle.
 *
 * # Safety
 * `report` is null or a live handle.
 */
int rtlmark_report_is_watermarked(const struct RtlmarkReport *report);

/**
 * Detection confidence in [0,1], NaN for a null handle.
 *
 * # Safety
 * `report` is null or a live handle.
 */
double rtlmark_report_confidence(const struct RtlmarkReport *report);

/**
 * Full report as JSON; free with `rtlmark_string_free`.
 *
 * # Safety
 * `report` is null or a live handle.
 */
char *rtlmark_report_json(const struct RtlmarkReport *report);

/**
 * # Safety
 * `report` is null or a handle from this library not yet freed.
 */
void rtlmark_report_free(struct RtlmarkReport *report);

/**
 * # Safety
 * `s` is null or a string returned by this library not yet freed.
 */
void rtlmark_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RTLMARK_H */
