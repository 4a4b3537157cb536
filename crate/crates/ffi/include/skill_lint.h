#ifndef SKILL_LINT_H
#define SKILL_LINT_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. Zero is success.
 */
typedef enum SlStatus {
  SL_STATUS_OK = 0,
  SL_STATUS_NULL_ARGUMENT = 1,
  SL_STATUS_INVALID_UTF8 = 2,
  SL_STATUS_NOT_A_DIRECTORY = 3,
  SL_STATUS_EMPTY_PACKAGE = 4,
  SL_STATUS_IO = 5,
  SL_STATUS_INVALID_RULES = 6,
  SL_STATUS_INTERNAL = 7,
  SL_STATUS_PANIC = 8,
} SlStatus;

/**
 * Analyzer settings plus collaborators. Reusable across packages.
 */
typedef struct SlAnalyzer SlAnalyzer;

/**
 * One package's analysis result.
 */
typedef struct SlReport SlReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates an analyzer. `rules_path` and `cache_dir` may be null for the
 * bundled rules and no page cache. Network access is never used.
 *
 * # Safety
 * Non-null string arguments must be NUL-terminated. `out` must be valid
 * for writes.
 */
enum SlStatus sl_analyzer_new(const char *rules_path,
                              const char *cache_dir,
                              struct SlAnalyzer **out);

/**
 * Keeps advisory findings in reports when `enabled` is true.
 *
 * # Safety
 * `analyzer` must come from [`sl_analyzer_new`] or be null.
 */
enum SlStatus sl_analyzer_set_advisories(struct SlAnalyzer *analyzer, bool enabled);

/**
 * Includes taint flows in reports when `enabled` is true.
 *
 * # Safety
 * `analyzer` must come from [`sl_analyzer_new`] or be null.
 */
enum SlStatus sl_analyzer_set_emit_flows(struct SlAnalyzer *analyzer, bool enabled);

/**
 * # Safety
 * `analyzer` must come from [`sl_analyzer_new`] or be null, and must not
 * be used afterwards.
 */
void sl_analyzer_free(struct SlAnalyzer *analyzer);

/**
 * Analyzes the package directory at `path`.
 *
 * # Safety
 * `analyzer` must be a live analyzer, `path` NUL-terminated, `out` valid
 * for writes.
 */
enum SlStatus sl_analyze(const struct SlAnalyzer *analyzer,
                         const char *path,
                         struct SlReport **out);

/**
 * The report as structured JSON. Owned by `report`; null if `report` is.
 *
 * # Safety
 * `report` must come from [`sl_analyze`] or be null.
 */
const char *sl_report_json(const struct SlReport *report);

/**
 * Number of findings in the report.
 *
 * # Safety
 * `report` must come from [`sl_analyze`] or be null.
 */
size_t sl_report_finding_count(const struct SlReport *report);

/**
 * True if any finding is a violation.
 *
 * # Safety
 * `report` must come from [`sl_analyze`] or be null.
 */
bool sl_report_has_violations(const struct SlReport *report);

/**
 * # Safety
 * `report` must come from [`sl_analyze`] or be null, and must not be used
 * afterwards.
 */
void sl_report_free(struct SlReport *report);

/**
 * Message for the last failed call on this thread, or null. Valid until
 * the next call on this thread.
 */
const char *sl_last_error_message(void);

/**
 * Library version, static.
 */
const char *sl_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SKILL_LINT_H */
