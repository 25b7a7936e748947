#ifndef ESMD_H
#define ESMD_H

/* Generated by cbindgen from the esmd-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Potentials constructible through the C API.
typedef enum EsmdPotentialName {
  EsmdPotentialName_SquaredL2 = 0,
  EsmdPotentialName_SquaredLp = 1,
  EsmdPotentialName_HuberMoreau = 2,
  EsmdPotentialName_AdjHypentropy = 3,
  EsmdPotentialName_Sigmoidal = 4,
} EsmdPotentialName;

typedef enum EsmdStatus {
  EsmdStatus_Ok = 0,
  EsmdStatus_NullPointer = 1,
  EsmdStatus_InvalidArgument = 2,
  EsmdStatus_DimensionMismatch = 3,
  EsmdStatus_Unsupported = 4,
  EsmdStatus_ConvergenceFailure = 5,
  EsmdStatus_Indeterminate = 6,
  EsmdStatus_Panic = 7,
} EsmdStatus;

typedef struct EsmdBody EsmdBody;

typedef struct EsmdDesign EsmdDesign;

typedef struct EsmdPotential EsmdPotential;

typedef struct EsmdTrace EsmdTrace;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message into `buf` (NUL-terminated, truncated to
// `len`); returns the full message length in bytes.
//
// # Safety
// `buf` must point to at least `len` writable bytes, or be null.
size_t esmd_last_error_message(char *buf, size_t len);

// Builds a design matrix from a row-major `n x d` buffer.
//
// # Safety
// `data` must point to `n * d` readable doubles; `out` must be writable.
enum EsmdStatus esmd_design_new(size_t n, size_t d, const double *data, struct EsmdDesign **out);

// Seeded i.i.d. standard Gaussian design.
//
// # Safety
// `out` must be writable.
enum EsmdStatus esmd_design_gaussian(size_t n,
                                     size_t d,
                                     uint64_t seed,
                                     uint64_t stream_id,
                                     struct EsmdDesign **out);

// The explicit block design used by the minimax simulation.
//
// # Safety
// `out` must be writable.
enum EsmdStatus esmd_design_hard(size_t n, size_t d, double p, struct EsmdDesign **out);

// Numerical rank (singular values above `1e-10 sigma_max`).
//
// # Safety
// `design` must be a live handle; `out` writable.
enum EsmdStatus esmd_design_rank(const struct EsmdDesign *design, size_t *out);

// # Safety
// `design` must be a handle from this library or null.
void esmd_design_free(struct EsmdDesign *design);

// Unit l_p ball (`p >= 1`; pass INFINITY for the cube).
//
// # Safety
// `out` must be writable.
enum EsmdStatus esmd_body_lp_ball(size_t d, double p, struct EsmdBody **out);

// H-polytope `{a : A a <= 1}` from a row-major `m x d` buffer; boundedness
// is certified at construction.
//
// # Safety
// `rows` must point to `m * d` readable doubles; `out` writable.
enum EsmdStatus esmd_body_polytope_h(size_t m, size_t d, const double *rows, struct EsmdBody **out);

// Minkowski functional (gauge) at `alpha`.
//
// # Safety
// `body` live handle, `alpha` readable for `len`, `out` writable.
enum EsmdStatus esmd_body_minkowski(const struct EsmdBody *body,
                                    const double *alpha,
                                    size_t len,
                                    double *out);

// Linear maximization oracle; writes the maximizer into `out_coords`.
//
// # Safety
// `body` live handle, `direction` readable and `out_coords` writable for `len`.
enum EsmdStatus esmd_body_lmo(const struct EsmdBody *body,
                              const double *direction,
                              size_t len,
                              double *out_coords);

// # Safety
// `body` must be a handle from this library or null.
void esmd_body_free(struct EsmdBody *body);

// Builds a potential from the zoo with its default certified parameters for
// radius `tau` (the l1-ball rules for the four named kinds).
//
// # Safety
// `out` must be writable.
enum EsmdStatus esmd_potential_new(enum EsmdPotentialName name,
                                   size_t d,
                                   double tau,
                                   struct EsmdPotential **out);

// Certified constants; `rho` is 0 when the potential has no discrete-time
// strong-convexity modulus.
//
// # Safety
// `potential` live handle; out pointers writable or null.
enum EsmdStatus esmd_potential_constants(const struct EsmdPotential *potential,
                                         double *out_c_l,
                                         double *out_c_u,
                                         double *out_c_a,
                                         double *out_rho);

// # Safety
// `potential` live handle, `alpha` readable for `len`, `out` writable.
enum EsmdStatus esmd_potential_value(const struct EsmdPotential *potential,
                                     const double *alpha,
                                     size_t len,
                                     double *out);

// # Safety
// `potential` live handle; `alpha` readable and `out_grad` writable for `len`.
enum EsmdStatus esmd_potential_gradient(const struct EsmdPotential *potential,
                                        const double *alpha,
                                        size_t len,
                                        double *out_grad);

// Bregman divergence `D_psi(a, b)`.
//
// # Safety
// `potential` live handle, `a`/`b` readable for `len`, `out` writable.
enum EsmdStatus esmd_potential_bregman(const struct EsmdPotential *potential,
                                       const double *a,
                                       const double *b,
                                       size_t len,
                                       double *out);

// # Safety
// `potential` must be a handle from this library or null.
void esmd_potential_free(struct EsmdPotential *potential);

// Runs discrete-time mirror descent from zero on `(design, y)` and returns a
// risk-trace handle. `truth` may be null (in-sample risks then unavailable);
// `eta <= 0` resolves the theorem step-size rule; the horizon is the theorem
// stopping time capped at `max_iters`.
//
// # Safety
// `design`/`potential` live handles; `y` readable for the design's row
// count; `truth` null or readable for its column count; `out` writable.
enum EsmdStatus esmd_md_run(const struct EsmdDesign *design,
                            const double *y,
                            const struct EsmdPotential *potential,
                            const double *truth,
                            double tau,
                            double epsilon,
                            double eta,
                            uint64_t max_iters,
                            uint64_t record_every,
                            struct EsmdTrace **out);

// Number of recorded states.
//
// # Safety
// `trace` must be a live handle.
size_t esmd_trace_len(const struct EsmdTrace *trace);

// Reads one recorded state; `out_in_sample` receives NaN when the ground
// truth was not provided.
//
// # Safety
// `trace` live handle; out pointers writable or null.
enum EsmdStatus esmd_trace_row(const struct EsmdTrace *trace,
                               size_t index,
                               double *out_t,
                               double *out_empirical,
                               double *out_in_sample);

// Position of the oracle stopping state among the recorded rows.
//
// # Safety
// `trace` live handle; `out` writable.
enum EsmdStatus esmd_trace_oracle_index(const struct EsmdTrace *trace, size_t *out);

// # Safety
// `trace` must be a handle from this library or null.
void esmd_trace_free(struct EsmdTrace *trace);

// Solves the constrained least squares baseline over `tau K`; writes the
// minimizer into `out_alpha` (length d) and reports objective / gap /
// iteration count through the out pointers.
//
// # Safety
// Handles live; `y` readable for n; `out_alpha` writable for d; scalar out
// pointers writable or null.
enum EsmdStatus esmd_solve_lse(const struct EsmdDesign *design,
                               const double *y,
                               const struct EsmdBody *body,
                               double tau,
                               double tol,
                               size_t max_iters,
                               double *out_alpha,
                               double *out_objective,
                               double *out_gap,
                               size_t *out_iterations);

// Monte Carlo Gaussian width of `X tau K`.
//
// # Safety
// Handles live; out pointers writable or null.
enum EsmdStatus esmd_gaussian_width(const struct EsmdDesign *design,
                                    const struct EsmdBody *body,
                                    double tau,
                                    size_t n_samples,
                                    uint64_t seed,
                                    uint64_t stream_id,
                                    double *out_mean,
                                    double *out_std_error);

// Critical radius of `(X tau K - X alpha*)` with its certified bracket.
//
// # Safety
// Handles live; `alpha_star` readable for d; out pointers writable or null.
enum EsmdStatus esmd_critical_radius(const struct EsmdDesign *design,
                                     const struct EsmdBody *body,
                                     double tau,
                                     const double *alpha_star,
                                     double tol,
                                     size_t n_samples,
                                     uint64_t seed,
                                     uint64_t stream_id,
                                     double *out_r_star,
                                     double *out_bracket_lo,
                                     double *out_bracket_hi);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ESMD_H */
