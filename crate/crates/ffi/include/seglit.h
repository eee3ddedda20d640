#ifndef SEGLIT_H
#define SEGLIT_H

/* Generated by cbindgen from crates/ffi; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Set in [`SeglitTestResult::flags`] when a logistic fit separates.
 */
#define SEGLIT_FLAG_SEPARATION 1

/**
 * Set when an expected cell count is below 5.
 */
#define SEGLIT_FLAG_SMALL_EXPECTED 2

typedef enum SeglitFormat {
  SEGLIT_FORMAT_HTML = 0,
  /**
   * HTML with class attributes instead of inline styles.
   */
  SEGLIT_FORMAT_HTML_CLASSES = 1,
  SEGLIT_FORMAT_ANSI = 2,
  /**
   * JSON array of `{start, end, weight, color}`.
   */
  SEGLIT_FORMAT_SPANS = 3,
} SeglitFormat;

typedef enum SeglitStatus {
  SEGLIT_STATUS_OK = 0,
  SEGLIT_STATUS_NULL_POINTER = 1,
  SEGLIT_STATUS_INVALID_UTF8 = 2,
  /**
   * Input rejected by the library; see the last error.
   */
  SEGLIT_STATUS_INVALID_INPUT = 3,
  /**
   * A Rust panic was caught at the boundary.
   */
  SEGLIT_STATUS_INTERNAL = 4,
} SeglitStatus;

/**
 * Opaque segmentation lexicon.
 */
typedef struct SeglitLexicon SeglitLexicon;

/**
 * Opaque style scheme.
 */
typedef struct SeglitScheme SeglitScheme;

/**
 * Result of a classical test. `p` is NaN when it is undefined.
 */
typedef struct SeglitTestResult {
  double statistic;
  double df;
  double p;
  double effect;
  uint32_t flags;
} SeglitTestResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next call into the library on this thread.
 */
const char *seglit_last_error(void);

/**
 * Library version as a static string.
 */
const char *seglit_version(void);

/**
 * Releases a string returned by the library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void seglit_string_free(char *s);

/**
 * Parses a lexicon in the tab-separated format.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be valid for a write.
 */
enum SeglitStatus seglit_lexicon_parse(const char *text, struct SeglitLexicon **out);

/**
 * # Safety
 * `lexicon` must be null or a live handle from [`seglit_lexicon_parse`].
 */
void seglit_lexicon_free(struct SeglitLexicon *lexicon);

/**
 * Segments and tags `text` into a one-document CoNLL-U string.
 *
 * # Safety
 * `lexicon` must be a live handle, `text` and `id` NUL-terminated strings,
 * `out` valid for a write.
 */
enum SeglitStatus seglit_segtag(const struct SeglitLexicon *lexicon,
                                const char *id,
                                const char *text,
                                char **out);

/**
 * Looks up a built-in scheme (`khmer-bold`, `ja-color`).
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be valid for a write.
 */
enum SeglitStatus seglit_scheme_builtin(const char *name, struct SeglitScheme **out);

/**
 * Parses a scheme from its JSON form.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be valid for a write.
 */
enum SeglitStatus seglit_scheme_from_json(const char *json, struct SeglitScheme **out);

/**
 * # Safety
 * `scheme` must be null or a live scheme handle.
 */
void seglit_scheme_free(struct SeglitScheme *scheme);

/**
 * Styles every document of `conllu` and renders them, one per line.
 * `lexicon` may be null; when given its tagset applies to Khmer input.
 *
 * # Safety
 * `scheme` must be a live handle, `lexicon` null or live, `conllu` a
 * NUL-terminated string, `out` valid for a write.
 */
enum SeglitStatus seglit_render(const struct SeglitScheme *scheme,
                                const struct SeglitLexicon *lexicon,
                                const char *conllu,
                                enum SeglitFormat format,
                                char **out);

/**
 * WCAG contrast ratio of two `#RRGGBB` colours.
 *
 * # Safety
 * `foreground` and `background` must be NUL-terminated strings; `out`
 * must be valid for a write.
 */
enum SeglitStatus seglit_contrast_ratio(const char *foreground,
                                        const char *background,
                                        double *out);

/**
 * Yates-corrected χ² on the 2×2 table `[[a, b], [c, d]]`, rows being
 * conditions and columns correct/incorrect.
 *
 * # Safety
 * `out` must be valid for a write.
 */
enum SeglitStatus seglit_chi2_yates(uint64_t a,
                                    uint64_t b,
                                    uint64_t c,
                                    uint64_t d,
                                    struct SeglitTestResult *out);

/**
 * Benjamini–Hochberg q-values for `len` p-values, written to `q_out` in
 * input order.
 *
 * # Safety
 * `p_values` must be readable and `q_out` writable for `len` elements.
 */
enum SeglitStatus seglit_bh_fdr(const double *p_values, size_t len, double *q_out);

/**
 * Paired t test on `len` within-participant differences.
 *
 * # Safety
 * `differences` must be readable for `len` elements; `out` writable.
 */
enum SeglitStatus seglit_paired_t(const double *differences,
                                  size_t len,
                                  struct SeglitTestResult *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SEGLIT_H */
