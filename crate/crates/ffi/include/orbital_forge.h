#ifndef ORBITAL_FORGE_H
#define ORBITAL_FORGE_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes.
 */
typedef enum OfStatus {
  OF_STATUS_OK = 0,
  OF_STATUS_NULL_POINTER = 1,
  OF_STATUS_INVALID_UTF8 = 2,
  OF_STATUS_CONFIG = 3,
  OF_STATUS_ARGUMENT = 4,
  OF_STATUS_DEGENERATE = 5,
  OF_STATUS_RESOURCE = 6,
  OF_STATUS_NUMERICAL = 7,
  OF_STATUS_RESOLUTION = 8,
  OF_STATUS_PANIC = 9,
} OfStatus;

/**
 * Opaque compact group (SU, SO or USp).
 */
typedef struct OfGroup OfGroup;

/**
 * Opaque root system.
 */
typedef struct OfRootSystem OfRootSystem;

/**
 * Monte Carlo estimate of a complex mean.
 */
typedef struct OfEstimate {
  double mean_re;
  double mean_im;
  double std_error;
  uint64_t n_samples;
} OfEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length in bytes, without
 * the terminator.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t of_last_error_message(char *buf, size_t len);

/**
 * Builds a root system. `family` is one of "A", "B", "C", "D", "G2"
 * (case-insensitive).
 *
 * # Safety
 * `family` must be a NUL-terminated string; `out` must be writable.
 */
enum OfStatus of_root_system_new(const char *family, size_t rank, struct OfRootSystem **out);

/**
 * # Safety
 * `rs` must come from [`of_root_system_new`] and not be used afterwards.
 */
void of_root_system_free(struct OfRootSystem *rs);

/**
 * Number of ambient coordinates of a Cartan point.
 *
 * # Safety
 * `rs` must be a live handle or null (returns 0).
 */
size_t of_root_system_ambient_dim(const struct OfRootSystem *rs);

/**
 * # Safety
 * `rs` must be a live handle; `out` must be writable.
 */
enum OfStatus of_weyl_order(const struct OfRootSystem *rs, uint64_t *out);

/**
 * `[[Π, Π]]`, the bracket of the discriminant with itself.
 *
 * # Safety
 * `rs` must be a live handle; `out` must be writable.
 */
enum OfStatus of_pi_pi_norm(const struct OfRootSystem *rs, double *out);

/**
 * `[[Π, Π]] / |W|`.
 *
 * # Safety
 * `rs` must be a live handle; `out` must be writable.
 */
enum OfStatus of_normalization_constant(const struct OfRootSystem *rs, double *out);

/**
 * Closed form of the orbital integral at real points `h1`, `h2`
 * (each `len` ambient coordinates).
 *
 * # Safety
 * `rs` must be a live handle; `h1`, `h2` valid for `len` doubles; the
 * outputs writable.
 */
enum OfStatus of_hc_rhs(const struct OfRootSystem *rs,
                        const double *h1,
                        const double *h2,
                        size_t len,
                        double *out_re,
                        double *out_im);

/**
 * `∫_{U(n)} e^{tr(A U B U*)} dU` for diagonal `A`, `B` with spectra `a`, `b`.
 *
 * # Safety
 * `a`, `b` valid for `n` doubles; `out` writable.
 */
enum OfStatus of_hciz(const double *a, const double *b, size_t n, double *out);

/**
 * Compact group handle. `family` is "su", "so" or "usp"; `size` the
 * matrix size.
 *
 * # Safety
 * `family` must be a NUL-terminated string; `out` writable.
 */
enum OfStatus of_group_new(const char *family, size_t size, struct OfGroup **out);

/**
 * # Safety
 * `g` must come from [`of_group_new`] and not be used afterwards.
 */
void of_group_free(struct OfGroup *g);

/**
 * Root system of a group as a new handle.
 *
 * # Safety
 * `g` must be a live handle; `out` writable.
 */
enum OfStatus of_group_root_system(const struct OfGroup *g, struct OfRootSystem **out);

/**
 * Haar Monte Carlo estimate of the orbital integral with `n` samples.
 * Deterministic in `seed` regardless of thread count.
 *
 * # Safety
 * `g` must be a live handle; `h1`, `h2` valid for `len` doubles; `out`
 * writable.
 */
enum OfStatus of_mc_orbital_integral(const struct OfGroup *g,
                                     const double *h1,
                                     const double *h2,
                                     size_t len,
                                     double t,
                                     uint64_t n,
                                     uint64_t seed,
                                     struct OfEstimate *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ORBITAL_FORGE_H */
