#ifndef TORUS_BIHARMONIC_H
#define TORUS_BIHARMONIC_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum BhStatus {
  BH_STATUS_OK = 0,
  BH_STATUS_NULL_POINTER = 1,
  BH_STATUS_INVALID_ARGUMENT = 2,
  BH_STATUS_LATTICE_MISMATCH = 3,
  BH_STATUS_NOT_CONVERGED = 4,
  BH_STATUS_INCOMPATIBLE = 5,
  BH_STATUS_PANIC = 6,
} BhStatus;

/**
 * A solved angle and its report.
 */
typedef struct BhSolution BhSolution;

/**
 * A conformal factor on a lattice, with its curvature.
 */
typedef struct BhStructure BhStructure;

typedef struct BhReport {
  int64_t class_m;
  int64_t class_n;
  size_t iterations;
  double final_relative_residual;
  double el_residual_maxnorm;
  bool converged;
  double bienergy;
  double vertical_bienergy;
  double horizontal_part;
  double area;
} BhReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Builds a structure from lattice generators `d1`, `d2` (two doubles each),
 * grid counts and `n1*n2` samples of `u` in row-major order (`t` fastest).
 * `u` may be null for the flat metric.
 *
 * # Safety
 * `d1`, `d2` must point to two doubles, `u` to `n1*n2` doubles or be null,
 * and `out` must be writable.
 */
enum BhStatus bh_structure_new(const double *d1,
                               const double *d2,
                               size_t n1,
                               size_t n2,
                               const double *u,
                               struct BhStructure **out);

/**
 * # Safety
 * `s` must be null or a handle from [`bh_structure_new`] not yet freed.
 */
void bh_structure_free(struct BhStructure *s);

/**
 * Copies the Gaussian curvature samples into `out` (`len` must be `n1*n2`).
 *
 * # Safety
 * `s` must be a live handle and `out` must hold `len` writable doubles.
 */
enum BhStatus bh_structure_curvature(const struct BhStructure *s, double *out, size_t len);

/**
 * Solves for the critical angle in class `(m, n)`. `max_iterations == 0`
 * selects the default cap.
 *
 * # Safety
 * `s` must be a live handle and `out` writable.
 */
enum BhStatus bh_solve(const struct BhStructure *s,
                       int64_t m,
                       int64_t n,
                       double tolerance,
                       size_t max_iterations,
                       struct BhSolution **out);

/**
 * # Safety
 * `sol` must be a live handle and `out` writable.
 */
enum BhStatus bh_solution_report(const struct BhSolution *sol, struct BhReport *out);

/**
 * Copies the total angle (linear part plus periodic part) into `out`.
 *
 * # Safety
 * `sol` must be a live handle and `out` must hold `len` writable doubles.
 */
enum BhStatus bh_solution_angle(const struct BhSolution *sol, double *out, size_t len);

/**
 * # Safety
 * `sol` must be null or a handle from [`bh_solve`] not yet freed.
 */
void bh_solution_free(struct BhSolution *sol);

/**
 * Bienergy of the unit field with total angle `theta` (`n1*n2` samples);
 * the homotopy class is read off the samples.
 *
 * # Safety
 * `s` must be a live handle, `theta` must hold `len` doubles and `out` must
 * be writable.
 */
enum BhStatus bh_bienergy(const struct BhStructure *s,
                          const double *theta,
                          size_t len,
                          double *out);

/**
 * Message for the last failed call on this thread, empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *bh_last_error_message(void);

const char *bh_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TORUS_BIHARMONIC_H */
