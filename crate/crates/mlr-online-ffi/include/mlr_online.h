#pragma once

/* Generated with cbindgen:0.29.4 */

/* Generated by cbindgen from the mlr-online-ffi crate; edit the Rust source instead. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of a C-interface call.
typedef enum MlrStatus {
  // The call succeeded.
  MLR_STATUS_OK = 0,
  // A required pointer was null.
  MLR_STATUS_NULL_ARGUMENT = 1,
  // A value was out of range or otherwise unusable.
  MLR_STATUS_INVALID_ARGUMENT = 2,
  // An array length disagreed with the handle's dimension.
  MLR_STATUS_DIMENSION_MISMATCH = 3,
} MlrStatus;

// Opaque handle to the two-branch streaming estimator.
typedef struct MlrAsymEm MlrAsymEm;

// Opaque handle to the sign-symmetric streaming estimator.
typedef struct MlrSymEm MlrSymEm;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Version of the library, as a static NUL-terminated string.
const char *mlr_version(void);

// Creates a sign-symmetric estimator with the identity gain prior.
// `beta0` is the starting estimate and must not be the zero vector;
// `sigma2` is the assumed noise variance. On success `*out` owns the
// new handle.
//
// # Safety
// `beta0` must point to `dim` readable doubles and `out` to a writable
// pointer slot. Release the handle with [`mlr_sym_free`].
enum MlrStatus mlr_sym_new(const double *beta0, size_t dim, double sigma2, struct MlrSymEm **out);

// Absorbs one observation `(phi, y)`. When `soft_target` is non-null
// it receives the posterior-weighted regression target the update
// used.
//
// # Safety
// `handle` must be a live handle from [`mlr_sym_new`]; `phi` must
// point to `dim` readable doubles; `soft_target` is either null or
// writable.
enum MlrStatus mlr_sym_step(struct MlrSymEm *handle,
                            const double *phi,
                            size_t dim,
                            double y,
                            double *soft_target);

// Copies the current estimate into `out`.
//
// # Safety
// `handle` must be a live handle from [`mlr_sym_new`] and `out` must
// point to `dim` writable doubles.
enum MlrStatus mlr_sym_estimate(const struct MlrSymEm *handle, double *out, size_t dim);

// Releases a handle created by [`mlr_sym_new`]. Null is ignored.
//
// # Safety
// `handle` must be null or a handle not yet freed.
void mlr_sym_free(struct MlrSymEm *handle);

// Creates a two-branch estimator from branch starting guesses with the
// identity gain prior. The branch guesses must not coincide; `sigma2`
// is the assumed noise variance. On success `*out` owns the new
// handle.
//
// # Safety
// `beta1_0` and `beta2_0` must point to `dim` readable doubles each
// and `out` to a writable pointer slot. Release the handle with
// [`mlr_asym_free`].
enum MlrStatus mlr_asym_new(const double *beta1_0,
                            const double *beta2_0,
                            size_t dim,
                            double sigma2,
                            struct MlrAsymEm **out);

// Absorbs one observation `(phi, y)`. When `innovation` is non-null it
// receives the centroid residual the update used.
//
// # Safety
// `handle` must be a live handle from [`mlr_asym_new`]; `phi` must
// point to `dim` readable doubles; `innovation` is either null or
// writable.
enum MlrStatus mlr_asym_step(struct MlrAsymEm *handle,
                             const double *phi,
                             size_t dim,
                             double y,
                             double *innovation);

// Copies the two branch estimates into `beta1_out` and `beta2_out`.
//
// # Safety
// `handle` must be a live handle from [`mlr_asym_new`]; both output
// arrays must point to `dim` writable doubles.
enum MlrStatus mlr_asym_estimates(const struct MlrAsymEm *handle,
                                  double *beta1_out,
                                  double *beta2_out,
                                  size_t dim);

// Releases a handle created by [`mlr_asym_new`]. Null is ignored.
//
// # Safety
// `handle` must be null or a handle not yet freed.
void mlr_asym_free(struct MlrAsymEm *handle);

// Assigns an observation to a signed branch of the mirrored model
// described by `beta`: `*index` becomes 1 for the negative branch and
// 2 for the positive one, picking the smaller squared residual.
//
// # Safety
// `beta` and `phi` must point to `dim` readable doubles each and
// `index` to a writable slot.
enum MlrStatus mlr_classify_sym(const double *beta,
                                const double *phi,
                                size_t dim,
                                double y,
                                unsigned int *index);

// Assigns an observation to one of two branches: `*index` becomes 1
// for `beta1` and 2 for `beta2`, picking the smaller squared residual.
//
// # Safety
// `beta1`, `beta2`, and `phi` must point to `dim` readable doubles
// each and `index` to a writable slot.
enum MlrStatus mlr_classify_asym(const double *beta1,
                                 const double *beta2,
                                 const double *phi,
                                 size_t dim,
                                 double y,
                                 unsigned int *index);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus
