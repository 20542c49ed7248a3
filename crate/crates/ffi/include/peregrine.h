#ifndef PEREGRINE_H
#define PEREGRINE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PgOperatorKind {
  /**
   * `I + mu T_b`
   */
  PG_OPERATOR_KIND_I_PLUS_MU_TB = 0,
  /**
   * `h_b B`
   */
  PG_OPERATOR_KIND_HB_B = 1,
  /**
   * `h_b A`
   */
  PG_OPERATOR_KIND_HB_A = 2,
} PgOperatorKind;

/**
 * Result codes.
 */
typedef enum PgStatus {
  PG_STATUS_OK = 0,
  PG_STATUS_NULL_POINTER = 1,
  PG_STATUS_INVALID_ARGUMENT = 2,
  PG_STATUS_INVALID_GRID = 3,
  PG_STATUS_LENGTH_MISMATCH = 4,
  PG_STATUS_DRY_STATE = 5,
  PG_STATUS_SOLVER_FAILURE = 6,
  PG_STATUS_CONFIG = 7,
  PG_STATUS_IO = 8,
  /**
   * A scenario ran but at least one verdict failed.
   */
  PG_STATUS_VERDICT_FAILED = 9,
  PG_STATUS_INTERNAL = 10,
  PG_STATUS_PANIC = 11,
} PgStatus;

/**
 * Opaque bathymetry on its grid.
 */
typedef struct PgBathymetry PgBathymetry;

/**
 * Opaque prefactorized elliptic operator.
 */
typedef struct PgOperator PgOperator;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread; empty after a success.
 * The pointer stays valid until the next call into this library on the same thread.
 */
const char *pg_last_error_message(void);

/**
 * Bottom `b = height * exp(-|x - c|^2 / width^2)` centered in a square domain of side `length`.
 */
enum PgStatus pg_bathymetry_new_gaussian(size_t dim,
                                         size_t n,
                                         double length,
                                         double gamma,
                                         double beta,
                                         double width,
                                         double height,
                                         struct PgBathymetry **out);

/**
 * Bottom from `n^dim` samples of `b`.
 */
enum PgStatus pg_bathymetry_new_samples(size_t dim,
                                        size_t n,
                                        double length,
                                        double gamma,
                                        double beta,
                                        const double *bottom,
                                        size_t len,
                                        struct PgBathymetry **out);

/**
 * Number of grid points `n^dim`.
 */
enum PgStatus pg_bathymetry_points(const struct PgBathymetry *bath, size_t *out);

/**
 * Minimum still-water depth `min h_b`.
 */
enum PgStatus pg_bathymetry_h_min(const struct PgBathymetry *bath, double *out);

/**
 * Depth field `h_b` into `out` (`n^dim` values).
 */
enum PgStatus pg_bathymetry_depth(const struct PgBathymetry *bath, double *out, size_t len);

void pg_bathymetry_free(struct PgBathymetry *bath);

/**
 * `q = (1/eps) ln(1 + eps zeta / h_b)`.
 */
enum PgStatus pg_zeta_to_q(const struct PgBathymetry *bath,
                           double eps,
                           const double *zeta,
                           size_t len,
                           double *q,
                           size_t q_len);

/**
 * Inverse of [`pg_zeta_to_q`].
 */
enum PgStatus pg_q_to_zeta(const struct PgBathymetry *bath,
                           double eps,
                           const double *q,
                           size_t len,
                           double *zeta,
                           size_t zeta_len);

/**
 * `1/2 |zeta|^2 + 1/2 (h_b (I + mu T_b) V, V)`; `velocity` holds `dim * n^dim` values.
 */
enum PgStatus pg_energy_bp(const struct PgBathymetry *bath,
                           double mu,
                           const double *zeta,
                           size_t zeta_len,
                           const double *velocity,
                           size_t velocity_len,
                           double *out);

/**
 * Prefactorizes an elliptic operator over `bath`.
 */
enum PgStatus pg_operator_new(const struct PgBathymetry *bath,
                              enum PgOperatorKind kind,
                              double mu,
                              struct PgOperator **out);

/**
 * `out = L v` for the operator `L` of the handle.
 */
enum PgStatus pg_operator_apply(const struct PgOperator *op,
                                const double *v,
                                size_t len,
                                double *out,
                                size_t out_len);

/**
 * `out = L^{-1} rhs`.
 */
enum PgStatus pg_operator_solve(const struct PgOperator *op,
                                const double *rhs,
                                size_t len,
                                double *out,
                                size_t out_len);

void pg_operator_free(struct PgOperator *op);

/**
 * Runs the experiment in the TOML file `config`.
 *
 * `out_dir` may be null (then the config's `output_dir`, if any, is used);
 * `jobs = 0` uses all cores. Returns `VERDICT_FAILED` when the run completed
 * but a verdict failed.
 */
enum PgStatus pg_run_config(const char *config, const char *out_dir, size_t jobs);

/**
 * Library version as a static NUL-terminated string.
 */
const char *pg_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PEREGRINE_H */
