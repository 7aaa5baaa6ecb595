#ifndef HDBELL_H
#define HDBELL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// `HDB_CONVENTION_PLUS` pairs `|k⟩|m⊕k⟩`, `HDB_CONVENTION_MINUS` pairs `|k⟩|m⊖k⟩`.
#define HDB_CONVENTION_PLUS 0

#define HDB_CONVENTION_MINUS 1

typedef enum HdbStatus {
  HDB_STATUS_OK = 0,
  HDB_STATUS_NULL_POINTER = 1,
  HDB_STATUS_INVALID_ARGUMENT = 2,
  HDB_STATUS_DIMENSION_MISMATCH = 3,
  HDB_STATUS_INVALID_STATE = 4,
  HDB_STATUS_INCOMPLETE = 5,
  HDB_STATUS_BUFFER_TOO_SMALL = 6,
  HDB_STATUS_INTERNAL = 7,
} HdbStatus;

typedef struct HdbDensity HdbDensity;

typedef struct HdbState HdbState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the calling thread's last error message into `buf` (NUL-terminated,
// truncated to `len`). Returns the full message length plus one, or 0 when the
// last call succeeded.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
uintptr_t hdb_last_error(char *buf, uintptr_t len);

// Library version, static NUL-terminated string.
const char *hdb_version(void);

// Ideal Bell state `|ψ_{m,n}⟩` of dimension `d²`.
//
// # Safety
// `out` must point to writable storage for one handle.
enum HdbStatus hdb_bell_state(uintptr_t d,
                              uintptr_t m,
                              uintptr_t n,
                              int32_t convention,
                              struct HdbState **out);

// Group state for correlation class `m` on the `{−1, 0, 1, 2}` window, prepared
// from its pump recipe. `sigma ≤ 0` selects flat `c_ℓ`, otherwise Gaussian.
// `efficiency` (nullable) receives the filter efficiency.
//
// # Safety
// `out` must point to writable storage for one handle; `efficiency` must be
// null or writable.
enum HdbStatus hdb_group_state(uintptr_t m,
                               double sigma,
                               struct HdbState **out,
                               double *efficiency);

// Dimension of a state, 0 for null.
//
// # Safety
// `state` must be null or a live handle.
uintptr_t hdb_state_dim(const struct HdbState *state);

// Writes `2·dim` interleaved amplitudes.
//
// # Safety
// `state` must be a live handle; `out` must hold `len` doubles.
enum HdbStatus hdb_state_amplitudes(const struct HdbState *state, double *out, uintptr_t len);

// # Safety
// `state` must be null or a handle not yet freed.
void hdb_state_free(struct HdbState *state);

// `|ψ⟩⟨ψ|/⟨ψ|ψ⟩`.
//
// # Safety
// `state` must be a live handle; `out` writable.
enum HdbStatus hdb_density_from_state(const struct HdbState *state, struct HdbDensity **out);

// Validated density matrix from `2·dim²` interleaved row-major entries.
//
// # Safety
// `entries` must hold `2·dim²` doubles; `out` writable.
enum HdbStatus hdb_density_from_entries(uintptr_t dim,
                                        const double *entries,
                                        struct HdbDensity **out);

// # Safety
// `rho` must be null or a live handle.
uintptr_t hdb_density_dim(const struct HdbDensity *rho);

// Writes `2·dim²` interleaved row-major entries.
//
// # Safety
// `rho` must be a live handle; `out` must hold `len` doubles.
enum HdbStatus hdb_density_entries(const struct HdbDensity *rho, double *out, uintptr_t len);

// # Safety
// `rho` must be null or a handle not yet freed.
void hdb_density_free(struct HdbDensity *rho);

// Number of joint tomography settings for dimension `d`; 0 if `d < 2`.
uintptr_t hdb_num_settings(uintptr_t d);

// Born probabilities over the standard joint settings, in their canonical order.
//
// # Safety
// `rho` must be a live handle; `out` must hold `len` doubles.
enum HdbStatus hdb_forward_probabilities(const struct HdbDensity *rho,
                                         uintptr_t d,
                                         double *out,
                                         uintptr_t len);

// Reconstructs a density matrix from probabilities over the standard joint
// settings. `shots = 0` means unknown. `chi_square` (nullable) receives the
// final χ²; a non-converged fit still returns `Ok` with the best iterate.
//
// # Safety
// `probabilities` must hold `len` doubles; `out` writable; `chi_square` null
// or writable.
enum HdbStatus hdb_reconstruct(uintptr_t d,
                               const double *probabilities,
                               uintptr_t len,
                               uint64_t shots,
                               struct HdbDensity **out,
                               double *chi_square);

// `⟨ψ|ρ|ψ⟩`.
//
// # Safety
// Handles must be live; `out` writable.
enum HdbStatus hdb_fidelity(const struct HdbDensity *rho,
                            const struct HdbState *target,
                            double *out);

// `(k−1)/d`.
//
// # Safety
// `out` must be writable.
enum HdbStatus hdb_witness_bound(uintptr_t k, uintptr_t d, double *out);

// Largest `k` with `F > (k−1)/d`, at least 1.
uintptr_t hdb_entanglement_dimensionality(double fidelity, uintptr_t d);

// Mutual information in bits of a row-major `rows × cols` confusion matrix
// under a uniform prior.
//
// # Safety
// `values` must hold `rows·cols` doubles; `out` writable.
enum HdbStatus hdb_mutual_information(uintptr_t rows,
                                      uintptr_t cols,
                                      const double *values,
                                      double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HDBELL_H */
