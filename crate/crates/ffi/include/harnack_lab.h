#ifndef HARNACK_LAB_H
#define HARNACK_LAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HlStatus {
  HL_STATUS_OK = 0,
  HL_STATUS_NULL_POINTER = 1,
  HL_STATUS_INVALID_ARGUMENT = 2,
  HL_STATUS_PARSE_ERROR = 3,
  HL_STATUS_EVALUATION_ERROR = 4,
  HL_STATUS_NON_POSITIVE = 5,
  HL_STATUS_OUTSIDE_SUPPORT = 6,
  HL_STATUS_EMPTY_REGION = 7,
  HL_STATUS_INTERNAL = 8,
} HlStatus;

typedef struct HlExpr HlExpr;

typedef struct HlOperator HlOperator;

typedef struct HlPathBatch HlPathBatch;

/**
 * Cylinder `(x_lo, x_hi) × B_radius`, subcylinder `[sub_x_lo, sub_x_hi] × B_inner_radius`,
 * and the stopping ball `B_stop_radius`.
 */
typedef struct HlDomain {
  double x_lo;
  double x_hi;
  double sub_x_lo;
  double sub_x_hi;
  double radius;
  double stop_radius;
  double inner_radius;
} HlDomain;

typedef struct HlCheckResult {
  bool pass;
  bool sign_change_ok;
  double min_derivative_mass;
  double beta_min;
  double beta_max;
  /**
   * -1 when no order up to the search limit passes.
   */
  int32_t smallest_passing_r;
} HlCheckResult;

typedef struct HlSimConfig {
  double dt;
  double t_max;
  size_t n_paths;
  uint64_t master_seed;
  /**
   * Nonzero: Brownian-bridge exit detection between grid times.
   */
  bool bridge;
} HlSimConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread. Valid until the next failing call.
 */
const char *hl_last_error(void);

/**
 * The default cylinder `(-5, 6) × B_3` with subcylinder `[0, 1] × B_1` and stopping ball `B_2`.
 */
struct HlDomain hl_domain_default(void);

/**
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void hl_string_free(char *s);

/**
 * Parses `text` over the `n_vars` variable names in `vars`.
 *
 * # Safety
 * `text` and each `vars[i]` must be NUL-terminated; `out` must be writable.
 */
enum HlStatus hl_expr_parse(const char *text,
                            const char *const *vars,
                            size_t n_vars,
                            struct HlExpr **out);

/**
 * # Safety
 * `e` must be a live handle; `values` must hold `n` doubles; `out` must be writable.
 */
enum HlStatus hl_expr_eval(const struct HlExpr *e, const double *values, size_t n, double *out);

/**
 * # Safety
 * `e` must be a live handle, `var` NUL-terminated, `out` writable.
 */
enum HlStatus hl_expr_differentiate(const struct HlExpr *e, const char *var, struct HlExpr **out);

/**
 * Fully parenthesised text of `e`; free with `hl_string_free`. NULL if `e` is NULL.
 *
 * # Safety
 * `e` must be a live handle or NULL.
 */
char *hl_expr_to_string(const struct HlExpr *e);

/**
 * # Safety
 * `e` must come from this library and not have been freed.
 */
void hl_expr_free(struct HlExpr *e);

/**
 * `β` over `y1..y{N-1}`, `γ` over `x, y1..`. `dom` may be NULL for the default domain.
 *
 * # Safety
 * Strings NUL-terminated, `dom` NULL or valid, `out` writable.
 */
enum HlStatus hl_operator_new(const char *beta,
                              const char *gamma,
                              size_t dim_n,
                              const struct HlDomain *dom,
                              struct HlOperator **out);

/**
 * # Safety
 * `op` must come from this library and not have been freed.
 */
void hl_operator_free(struct HlOperator *op);

/**
 * # Safety
 * `op` live, `dom` NULL or valid, `out` writable.
 */
enum HlStatus hl_check_hypothesis(const struct HlOperator *op,
                                  const struct HlDomain *dom,
                                  uint32_t r,
                                  double grid_step,
                                  struct HlCheckResult *out);

/**
 * # Safety
 * `op` live, `dom` NULL or valid, `start_y` holds `n_y` doubles, `cfg` valid, `out` writable.
 */
enum HlStatus hl_simulate(const struct HlOperator *op,
                          const struct HlDomain *dom,
                          double start_x,
                          const double *start_y,
                          size_t n_y,
                          const struct HlSimConfig *cfg,
                          struct HlPathBatch **out);

/**
 * # Safety
 * `b` live or NULL (returns 0).
 */
size_t hl_batch_len(const struct HlPathBatch *b);

/**
 * # Safety
 * `b` live or NULL (returns 0).
 */
size_t hl_batch_dim_y(const struct HlPathBatch *b);

/**
 * Stopped state of path `i`. `y` receives `dim_y` doubles; any output pointer may be NULL.
 *
 * # Safety
 * `b` live; non-NULL outputs writable, `y` with room for `dim_y` doubles.
 */
enum HlStatus hl_batch_path(const struct HlPathBatch *b,
                            size_t i,
                            double *x,
                            double *y,
                            double *stop_time,
                            double *gamma_integral,
                            bool *exited);

/**
 * # Safety
 * `b` live; `mean`, `std_error` writable.
 */
enum HlStatus hl_batch_mean_stop_time(const struct HlPathBatch *b, double *mean, double *std_error);

/**
 * # Safety
 * `b` must come from this library and not have been freed.
 */
void hl_batch_free(struct HlPathBatch *b);

/**
 * Feynman–Kac estimate of `u_data` (an expression over `x, y1..`) from the start point at horizon `t`.
 *
 * # Safety
 * Handles live, `dom` NULL or valid, `start_y` holds `n_y` doubles, outputs writable.
 */
enum HlStatus hl_fk_evaluate(const struct HlOperator *op,
                             const struct HlDomain *dom,
                             const struct HlExpr *u_data,
                             double start_x,
                             const double *start_y,
                             size_t n_y,
                             double t,
                             const struct HlSimConfig *cfg,
                             double *value,
                             double *std_error);

/**
 * Grid sup/inf ratio of `e^{-λx} cosh(√λ y)` over `[0, 1] × [-1, 1]` with `nx × ny` nodes.
 *
 * # Safety
 * `out` writable.
 */
enum HlStatus hl_counterexample_ratio(double lambda, size_t nx, size_t ny, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HARNACK_LAB_H */
