#ifndef RUNMAX_H
#define RUNMAX_H

/* Generated by cbindgen from runmax-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define RM_OK 0

#define RM_ERR_ARG 1

#define RM_ERR_CONFIG 2

#define RM_ERR_NUMERIC 3

// Opaque model handle: parameters plus jump specification.
typedef struct rm_model rm_model;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Last error message for this thread, or NULL. Valid until the next
// failing call on the same thread.
const char *rm_last_error(void);

// # Safety
// `out` must be a valid pointer to an `RmModel*` slot.
int32_t rm_model_new_cox(double mu,
                         double sigma1,
                         double kappa,
                         double theta,
                         double sigma2,
                         double lambda0,
                         double s0,
                         double horizon,
                         struct rm_model **out);

// # Safety
// `out` must be a valid pointer to an `RmModel*` slot.
int32_t rm_model_new_hawkes(double mu,
                            double sigma1,
                            double kappa,
                            double theta,
                            double eta,
                            double lambda0,
                            double s0,
                            double horizon,
                            struct rm_model **out);

// Attach a discrete jump measure with a constant jump size `j_const`.
//
// # Safety
// `model` must come from `rm_model_new_*`; `atoms_z` and `atoms_w` must
// point to `n_atoms` doubles each.
int32_t rm_model_set_jumps(struct rm_model *model,
                           const double *atoms_z,
                           const double *atoms_w,
                           size_t n_atoms,
                           double j_const);

// # Safety
// `model` must come from `rm_model_new_*` and not be freed twice.
void rm_model_free(struct rm_model *model);

// Mean and standard error of the running maximum M_T over `n_paths`.
//
// # Safety
// `model`, `out_mean`, `out_se` must be valid pointers.
int32_t rm_estimate_max(const struct rm_model *model,
                        uint64_t seed,
                        uint32_t n_steps,
                        uint32_t n_paths,
                        double *out_mean,
                        double *out_se);

// Lookback price; `fixed_strike != 0` selects `(e^{M_T} - strike)^+`,
// otherwise the floating-strike payoff. `discount` of NaN means "use mu".
//
// # Safety
// `model`, `out_price`, `out_se` must be valid pointers.
int32_t rm_price_lookback(const struct rm_model *model,
                          uint64_t seed,
                          uint32_t n_steps,
                          uint32_t n_paths,
                          int32_t fixed_strike,
                          double strike,
                          double discount,
                          double *out_price,
                          double *out_se);

// Exponential-tilt constants for the model's closed-form tails.
//
// # Safety
// Output pointers must be valid.
int32_t rm_constants(const struct rm_model *model,
                     double *out_alpha1,
                     double *out_alpha2,
                     double *out_alpha);

// P(sup X >= b and sup lambda >= e on [0, T]) by Monte Carlo.
//
// # Safety
// `model`, `out_prob`, `out_se` must be valid pointers.
int32_t rm_first_passage(const struct rm_model *model,
                         double b,
                         double e,
                         uint64_t seed,
                         uint32_t n_steps,
                         uint32_t n_paths,
                         double *out_prob,
                         double *out_se);

// Invert a named transform: "one_over_s", "one_over_s_plus_1",
// "one_over_s2". `method`: 0 Gaver-Stehfest, 1 Talbot; `order` 0 for the
// engine default.
//
// # Safety
// `name` must be a NUL-terminated string; `out` a valid pointer.
int32_t rm_invert_laplace(const char *name, double t, int32_t method, uint32_t order, double *out);

// One simulated path's node maximum and continuous (bridge-refined)
// maximum; mostly a determinism probe for bindings.
//
// # Safety
// Pointers must be valid.
int32_t rm_simulate_one(const struct rm_model *model,
                        uint64_t seed,
                        uint64_t path_id,
                        uint32_t n_steps,
                        double *out_max_nodes,
                        double *out_max_cont);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RUNMAX_H */
