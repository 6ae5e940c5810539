#ifndef UNITZIPF_H
#define UNITZIPF_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum UzStatus {
  UZ_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  UZ_STATUS_NULL_POINTER = 1,
  /**
   * An argument was out of range or inconsistent.
   */
  UZ_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Input data was malformed or insufficient.
   */
  UZ_STATUS_INPUT_ERROR = 3,
  /**
   * A file could not be read or written.
   */
  UZ_STATUS_IO_ERROR = 4,
  /**
   * An unexpected internal failure.
   */
  UZ_STATUS_INTERNAL = 5,
} UzStatus;

/**
 * Trained k-means codebook.
 */
typedef struct UzCodebook UzCodebook;

/**
 * Mergeable n-gram count table over unit ids.
 */
typedef struct UzNgramTable UzNgramTable;

/**
 * Result of a power-law fit `f = a * r^(-eta)`.
 */
typedef struct UzPowerLawFit {
  double a;
  double eta;
  bool eta_fixed;
  double rmse_log;
  size_t n_points;
  size_t trim_lo_rank;
  size_t trim_hi_rank;
} UzPowerLawFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failed call on this thread, or null.
 *
 * The pointer stays valid until the next call into this library on the
 * same thread.
 */
const char *uz_last_error_message(void);

/**
 * Collapses runs of repeated units. `out` must hold `len` elements; the
 * number written is stored in `out_len`.
 *
 * # Safety
 * `units` must point to `len` readable values, `out` to `len` writable ones.
 */
enum UzStatus uz_dedupe(const uint32_t *units, size_t len, uint32_t *out, size_t *out_len);

/**
 * Trains a `k`-centroid codebook on `n_frames` row-major frames of `dim`
 * values each.
 *
 * # Safety
 * `frames` must point to `n_frames * dim` readable floats and `out` must be
 * writable.
 */
enum UzStatus uz_kmeans_train(const float *frames,
                              size_t n_frames,
                              size_t dim,
                              size_t k,
                              uint64_t seed,
                              size_t max_iters,
                              double tol,
                              struct UzCodebook **out);

/**
 * Loads a codebook file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` must be writable.
 */
enum UzStatus uz_codebook_read(const char *path, struct UzCodebook **out);

/**
 * Saves a codebook file.
 *
 * # Safety
 * `codebook` must be a live handle and `path` a NUL-terminated string.
 */
enum UzStatus uz_codebook_write(const struct UzCodebook *codebook, const char *path);

/**
 * Releases a codebook. Null is ignored.
 *
 * # Safety
 * `codebook` must be null or a handle not yet freed.
 */
void uz_codebook_free(struct UzCodebook *codebook);

/**
 * Number of centroids, or 0 for a null handle.
 *
 * # Safety
 * `codebook` must be null or a live handle.
 */
size_t uz_codebook_k(const struct UzCodebook *codebook);

/**
 * Frame dimension, or 0 for a null handle.
 *
 * # Safety
 * `codebook` must be null or a live handle.
 */
size_t uz_codebook_dim(const struct UzCodebook *codebook);

/**
 * Maps each of `n_frames` frames to its nearest centroid id, writing
 * `n_frames` ids to `out_units`.
 *
 * # Safety
 * `codebook` must be a live handle, `frames` must point to
 * `n_frames * dim` floats and `out_units` to `n_frames` writable ids.
 */
enum UzStatus uz_codebook_assign(const struct UzCodebook *codebook,
                                 const float *frames,
                                 size_t n_frames,
                                 size_t dim,
                                 uint32_t *out_units);

/**
 * Creates an empty table of unit `n`-grams.
 *
 * # Safety
 * `out` must be writable.
 */
enum UzStatus uz_table_new_units(size_t n, struct UzNgramTable **out);

/**
 * Counts the n-grams of one utterance into the table.
 *
 * # Safety
 * `table` must be a live handle and `units` must point to `len` ids.
 */
enum UzStatus uz_table_add_units(struct UzNgramTable *table, const uint32_t *units, size_t len);

/**
 * Adds the counts of `other` into `table`.
 *
 * # Safety
 * Both handles must be live.
 */
enum UzStatus uz_table_merge(struct UzNgramTable *table, const struct UzNgramTable *other);

/**
 * Total n-gram occurrences, or 0 for a null handle.
 *
 * # Safety
 * `table` must be null or a live handle.
 */
uint64_t uz_table_total(const struct UzNgramTable *table);

/**
 * Number of distinct n-grams, or 0 for a null handle.
 *
 * # Safety
 * `table` must be null or a live handle.
 */
size_t uz_table_vocab(const struct UzNgramTable *table);

/**
 * Writes the table as CSV.
 *
 * # Safety
 * `table` must be a live handle and `path` a NUL-terminated string.
 */
enum UzStatus uz_table_write_csv(const struct UzNgramTable *table, const char *path);

/**
 * Releases a table. Null is ignored.
 *
 * # Safety
 * `table` must be null or a handle not yet freed.
 */
void uz_table_free(struct UzNgramTable *table);

/**
 * Fits `f = a * r^(-eta)` to `n` (rank, frequency) pairs. Pass NaN as
 * `fix_eta` to estimate the exponent, or a number to hold it fixed.
 *
 * # Safety
 * `ranks` and `freqs` must each point to `n` values; `out` must be writable.
 */
enum UzStatus uz_fit_powerlaw(const double *ranks,
                              const double *freqs,
                              size_t n,
                              double fix_eta,
                              struct UzPowerLawFit *out);

/**
 * Ranks the table, keeps the band between the rank fractions `trim_lo` and
 * `trim_hi`, and fits it. `fix_eta` behaves as in [`uz_fit_powerlaw`].
 *
 * # Safety
 * `table` must be a live handle and `out` must be writable.
 */
enum UzStatus uz_table_fit(const struct UzNgramTable *table,
                           double trim_lo,
                           double trim_hi,
                           double fix_eta,
                           struct UzPowerLawFit *out);

/**
 * Smallest `n` with `n * ref_total_len >= target_total_len`.
 *
 * # Safety
 * `out` must be writable.
 */
enum UzStatus uz_choose_n(uint64_t ref_total_len, uint64_t target_total_len, size_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* UNITZIPF_H */
