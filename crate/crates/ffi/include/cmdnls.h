#ifndef CMDNLS_H
#define CMDNLS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Gauge tag of a field: 0 for ungauged, 1 for gauged.
 */
#define CM_UNGAUGED 0

#define CM_GAUGED 1

/**
 * Result code of every fallible call.
 */
typedef enum CmStatus {
  CM_STATUS_OK = 0,
  CM_STATUS_NULL_POINTER = 1,
  CM_STATUS_INVALID_ARGUMENT = 2,
  CM_STATUS_INVALID_GRID = 3,
  CM_STATUS_TAG_MISMATCH = 4,
  CM_STATUS_GRID_MISMATCH = 5,
  CM_STATUS_NON_FINITE = 6,
  /**
   * The run stopped early at the Ḣ¹ threshold or on a non-finite step.
   * The field holds the last finite state.
   */
  CM_STATUS_BLOW_UP = 7,
  CM_STATUS_FIT_FAILED = 8,
  CM_STATUS_SMALL_ENERGY = 9,
  CM_STATUS_IO = 10,
  CM_STATUS_FORMAT = 11,
  CM_STATUS_PANIC = 12,
} CmStatus;

/**
 * A field on a periodic grid together with its time.
 */
typedef struct CmField CmField;

/**
 * Result of a bubble decomposition.
 */
typedef struct CmReport CmReport;

typedef struct CmConserved {
  double mass;
  double energy;
  double momentum;
} CmConserved;

typedef struct CmExtractOptions {
  double radius;
  double theta;
  double alpha_star;
  uint32_t max_bubbles;
} CmExtractOptions;

typedef struct CmBubble {
  double lambda;
  double gamma;
  double x;
  double dichotomy;
} CmBubble;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null if none.
 *
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *cm_last_error(void);

/**
 * Creates a field from `2n` interleaved doubles (re, im) on [-L, L).
 *
 * # Safety
 * `samples` must point to `2n` readable doubles and `out` must be writable.
 */
enum CmStatus cm_field_new(uint32_t n,
                           double half_width,
                           uint8_t tag,
                           double t,
                           const double *samples,
                           struct CmField **out);

/**
 * Creates the ground state: Q for a gauged tag, 𝓡 for an ungauged one.
 *
 * # Safety
 * `out` must be writable.
 */
enum CmStatus cm_field_ground_state(uint32_t n,
                                    double half_width,
                                    uint8_t tag,
                                    struct CmField **out);

/**
 * Releases a field. Null is ignored.
 *
 * # Safety
 * `f` must come from this library and not be used afterwards.
 */
void cm_field_free(struct CmField *f);

/**
 * Number of grid points, 0 for null.
 *
 * # Safety
 * `f` must be null or a live field.
 */
uintptr_t cm_field_len(const struct CmField *f);

/**
 * Half-width L of the grid, NaN for null.
 *
 * # Safety
 * `f` must be null or a live field.
 */
double cm_field_half_width(const struct CmField *f);

/**
 * Time stamp of the field, NaN for null.
 *
 * # Safety
 * `f` must be null or a live field.
 */
double cm_field_time(const struct CmField *f);

/**
 * Gauge tag code, 255 for null.
 *
 * # Safety
 * `f` must be null or a live field.
 */
uint8_t cm_field_tag(const struct CmField *f);

/**
 * Copies the samples as interleaved (re, im) into `out`, which holds `cap`
 * doubles; `cap` must be at least `2 * cm_field_len(f)`.
 *
 * # Safety
 * `f` must be a live field and `out` must point to `cap` writable doubles.
 */
enum CmStatus cm_field_samples(const struct CmField *f, double *out, uintptr_t cap);

/**
 * Reads a binary snapshot.
 *
 * # Safety
 * `path` must be a nul-terminated string and `out` must be writable.
 */
enum CmStatus cm_snapshot_read(const char *path, struct CmField **out);

/**
 * Writes a binary snapshot of the field at its own time.
 *
 * # Safety
 * `f` must be a live field and `path` a nul-terminated string.
 */
enum CmStatus cm_snapshot_write(const struct CmField *f, const char *path);

/**
 * Mass, energy and momentum for the field's own flow.
 *
 * # Safety
 * `f` must be a live field and `out` writable.
 */
enum CmStatus cm_field_conserved(const struct CmField *f, struct CmConserved *out);

/**
 * Maps an ungauged field u to the gauged field -𝒢(u).
 *
 * # Safety
 * `f` must be a live field and `out` writable.
 */
enum CmStatus cm_field_gauge(const struct CmField *f, struct CmField **out);

/**
 * Inverse of [`cm_field_gauge`].
 *
 * # Safety
 * `f` must be a live field and `out` writable.
 */
enum CmStatus cm_field_ungauge(const struct CmField *f, struct CmField **out);

/**
 * Advances the field in place by one step of size `dt` (negative runs
 * backwards). `dealias` is 2 or 3.
 *
 * # Safety
 * `f` must be a live field.
 */
enum CmStatus cm_field_step(struct CmField *f, double dt, uint32_t dealias);

/**
 * Evolves the field in place to `t_end` with adaptive steps. A positive
 * `hstop` stops early once the Ḣ¹ norm reaches it, returning
 * [`CmStatus::BlowUp`] with the last state kept.
 *
 * # Safety
 * `f` must be a live field.
 */
enum CmStatus cm_field_evolve(struct CmField *f, double t_end, uint32_t dealias, double hstop);

/**
 * Default extraction options.
 */
struct CmExtractOptions cm_extract_options_default(void);

/**
 * Extracts the bubble decomposition of a gauged field. A fit failure still
 * yields a report; check [`cm_report_fit_failed`].
 *
 * # Safety
 * `f` must be a live field, `opts` readable and `out` writable.
 */
enum CmStatus cm_decompose(const struct CmField *f,
                           const struct CmExtractOptions *opts,
                           struct CmReport **out);

/**
 * Releases a report. Null is ignored.
 *
 * # Safety
 * `r` must come from this library and not be used afterwards.
 */
void cm_report_free(struct CmReport *r);

/**
 * Number of extracted bubbles, 0 for null.
 *
 * # Safety
 * `r` must be null or a live report.
 */
uintptr_t cm_report_count(const struct CmReport *r);

/**
 * Bubble budget used by the extraction, 0 for null.
 *
 * # Safety
 * `r` must be null or a live report.
 */
uintptr_t cm_report_max_allowed(const struct CmReport *r);

/**
 * True when a level's fit failed; the message is in [`cm_last_error`].
 *
 * # Safety
 * `r` must be null or a live report.
 */
bool cm_report_fit_failed(const struct CmReport *r);

/**
 * Parameters of bubble `index` (0-based, extraction order).
 *
 * # Safety
 * `r` must be a live report and `out` writable.
 */
enum CmStatus cm_report_bubble(const struct CmReport *r, uintptr_t index, struct CmBubble *out);

/**
 * Mass-ledger defect at level `k`: (M - 2πk) - ‖ε_k‖².
 *
 * # Safety
 * `r` must be a live report and `out` writable.
 */
enum CmStatus cm_report_ledger_defect(const struct CmReport *r, uintptr_t level, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CMDNLS_H */
