#ifndef RBMR_H
#define RBMR_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>
#include <stdint.h>
#include <stddef.h>
#include <stdbool.h>


/**
 * Status codes mirroring the CLI exit-code contract.
 */
typedef enum RbmrStatus {
  RBMR_STATUS_OK = 0,
  RBMR_STATUS_CONFIG_ERROR = 1,
  RBMR_STATUS_EMPTY_INPUT = 2,
  RBMR_STATUS_NUMERIC_ERROR = 3,
  RBMR_STATUS_NULL_POINTER = 4,
} RbmrStatus;

/**
 * Opaque harmonized dataset handle.
 */
typedef struct rbmr_dataset rbmr_dataset;

/**
 * Opaque fit-result handle.
 */
typedef struct rbmr_fit_result rbmr_fit_result;

/**
 * Opaque block-diagonal LD matrix handle.
 */
typedef struct rbmr_ld rbmr_ld;

/**
 * Fit options passed by value across the ABI.
 */
typedef struct RbmrFitOptions {
  uint64_t max_iter;
  double elbo_rel_tol;
  double alpha_w;
  double beta_w;
} RbmrFitOptions;

/**
 * Baseline estimator output passed by value across the ABI.
 */
typedef struct RbmrBaselineResult {
  double beta_hat;
  double se;
  double pvalue;
  double intercept;
  double intercept_se;
  bool has_intercept;
  uint64_t n_snps;
} RbmrBaselineResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Version string of the linked library; static storage, do not free.
 */
const char *rbmr_version(void);

/**
 * Message of the most recent error on this thread, or NULL. The caller
 * owns the returned string and must free it with `rbmr_string_free`.
 */
char *rbmr_last_error(void);

/**
 * # Safety
 * `s` must be a pointer returned by `rbmr_last_error` (or NULL), not yet freed.
 */
void rbmr_string_free(char *s);

/**
 * Default fit options (10000 iterations, 1e-7 relative ELBO tolerance,
 * Gamma(2, 2) scale-weight prior).
 */
struct RbmrFitOptions rbmr_fit_options_default(void);

/**
 * Build a dataset from parallel arrays of length `n_snps` and a block
 * layout given as `n_blocks` contiguous block sizes summing to `n_snps`.
 * Returns NULL on error (see `rbmr_last_error`).
 *
 * # Safety
 * All array pointers must be valid for their stated lengths.
 */
struct rbmr_dataset *rbmr_dataset_new(const double *exposure_beta,
                                      const double *exposure_se,
                                      const double *outcome_beta,
                                      const double *outcome_se,
                                      uint64_t n_snps,
                                      const uint64_t *block_sizes,
                                      uint64_t n_blocks);

/**
 * # Safety
 * `ds` must be a pointer from `rbmr_dataset_new` (or NULL), not yet freed.
 */
void rbmr_dataset_free(struct rbmr_dataset *ds);

/**
 * Identity LD matching the dataset's block layout.
 *
 * # Safety
 * `ds` must be a valid dataset handle.
 */
struct rbmr_ld *rbmr_ld_identity(const struct rbmr_dataset *ds);

/**
 * Build a block-diagonal LD matrix from concatenated row-major block
 * payloads: block k occupies `block_sizes[k]^2` consecutive doubles.
 *
 * # Safety
 * `block_sizes` must hold `n_blocks` entries and `payload` the matching
 * total number of doubles.
 */
struct rbmr_ld *rbmr_ld_new(const uint64_t *block_sizes,
                            uint64_t n_blocks,
                            const double *payload,
                            double lambda);

/**
 * # Safety
 * `ld` must be a pointer from an `rbmr_ld_*` constructor (or NULL), not yet freed.
 */
void rbmr_ld_free(struct rbmr_ld *ld);

/**
 * Fit the model; on success writes a fresh fit handle into `out`.
 *
 * # Safety
 * `ds` and `ld` must be valid handles; `out` must point to writable storage
 * for one pointer. `opts` may be NULL for defaults.
 */
enum RbmrStatus rbmr_fit(const struct rbmr_dataset *ds,
                         const struct rbmr_ld *ld,
                         const struct RbmrFitOptions *opts,
                         struct rbmr_fit_result **out);

/**
 * # Safety
 * `f` must be a pointer from `rbmr_fit` (or NULL), not yet freed.
 */
void rbmr_fit_free(struct rbmr_fit_result *f);

/**
 * Inverse-variance weighted estimate on a (pruned) dataset.
 *
 * # Safety
 * `ds` must be a valid dataset handle; `out` must point to writable storage.
 */
enum RbmrStatus rbmr_ivw(const struct rbmr_dataset *ds, struct RbmrBaselineResult *out);

/**
 * MR-Egger regression on a (pruned) dataset.
 *
 * # Safety
 * `ds` must be a valid dataset handle; `out` must point to writable storage.
 */
enum RbmrStatus rbmr_mr_egger(const struct rbmr_dataset *ds, struct RbmrBaselineResult *out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* RBMR_H */
