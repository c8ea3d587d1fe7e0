#ifndef TDCM_H
#define TDCM_H

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TdcmStatus {
  TDCM_STATUS_OK = 0,
  TDCM_STATUS_NULL_POINTER = 1,
  TDCM_STATUS_INVALID_ARGUMENT = 2,
  TDCM_STATUS_DOMAIN = 3,
  TDCM_STATUS_CONFIG = 4,
  TDCM_STATUS_IDENTIFICATION = 5,
  TDCM_STATUS_DETECTION_TIMEOUT = 6,
  TDCM_STATUS_SENSOR = 7,
  TDCM_STATUS_IO = 8,
  TDCM_STATUS_SATURATED = 9,
  TDCM_STATUS_PANIC = 10,
} TdcmStatus;

/**
 * Causal Butterworth low-pass.
 */
typedef struct TdcmFilter TdcmFilter;

/**
 * Hysteresis model with its own state.
 */
typedef struct TdcmModel TdcmModel;

/**
 * Shaft shape under construction.
 */
typedef struct TdcmShape TdcmShape;

/**
 * Hysteresis parameters in degrees; `omega` is dimensionless.
 */
typedef struct TdcmParams {
  double d_pos_deg;
  double d_neg_deg;
  double b_pos_deg;
  double b_neg_deg;
  double omega;
  double h_pos_deg;
  double h_neg_deg;
  double x_ref_pos_deg;
  double x_ref_neg_deg;
} TdcmParams;

/**
 * Result of a shift detection, degrees.
 */
typedef struct TdcmShiftEstimate {
  double d_tilde_pos_deg;
  double d_tilde_neg_deg;
  double offset_deg;
  /**
   * +1 when the positive edge was found, -1 for the negative one.
   */
  int detected_side;
  size_t iterations_used;
  size_t direction_flips;
} TdcmShiftEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy of the last error message on this thread, or NULL. Release with
 * [`tdcm_string_free`].
 */
char *tdcm_last_error_message(void);

/**
 * Releases a string returned by this library. NULL is ignored.
 */
void tdcm_string_free(char *s);

/**
 * Default parameter set.
 */
struct TdcmParams tdcm_params_default(void);

enum TdcmStatus tdcm_shape_new(double beta_catheter_mm,
                               double beta_knob_mm,
                               struct TdcmShape **out);

enum TdcmStatus tdcm_shape_add_curved(struct TdcmShape *shape,
                                      double radius_mm,
                                      double alpha_deg,
                                      double theta_deg);

enum TdcmStatus tdcm_shape_add_straight(struct TdcmShape *shape, double length_mm);

/**
 * Knob offsets the shape imposes on each knob, degrees.
 */
enum TdcmStatus tdcm_shape_knob_offset(const struct TdcmShape *shape,
                                       double *ap_deg,
                                       double *lr_deg);

void tdcm_shape_free(struct TdcmShape *shape);

enum TdcmStatus tdcm_model_new(const struct TdcmParams *params, struct TdcmModel **out);

/**
 * New model translated along the input axis, at rest at zero input.
 */
enum TdcmStatus tdcm_model_shifted(const struct TdcmModel *model,
                                   double offset_deg,
                                   struct TdcmModel **out);

/**
 * Opposite dead-zone boundaries, degrees.
 */
enum TdcmStatus tdcm_model_hat_boundaries(const struct TdcmModel *model,
                                          double *d_hat_pos_deg,
                                          double *d_hat_neg_deg);

/**
 * Puts the model at rest at input `x0_deg`.
 */
enum TdcmStatus tdcm_model_reset(struct TdcmModel *model, double x0_deg);

enum TdcmStatus tdcm_model_step(struct TdcmModel *model, double x_deg, double *y_deg);

/**
 * Input that brings the model to `y_deg`. `direction` is the sign of the
 * desired motion. On `TDCM_STATUS_SATURATED` the clamped command is still
 * written to `x_deg`. The model state is not advanced.
 */
enum TdcmStatus tdcm_model_inverse(const struct TdcmModel *model,
                                   double y_deg,
                                   int direction,
                                   double knob_limit_deg,
                                   double *x_deg);

void tdcm_model_free(struct TdcmModel *model);

enum TdcmStatus tdcm_filter_new(size_t order,
                                double cutoff_hz,
                                double sample_rate_hz,
                                struct TdcmFilter **out);

/**
 * Filters `n` samples from `input` into `output` (which may alias).
 */
enum TdcmStatus tdcm_filter_process(struct TdcmFilter *filter,
                                    const double *input,
                                    double *output,
                                    size_t n);

void tdcm_filter_free(struct TdcmFilter *filter);

/**
 * Runs a scenario given as a JSON document and returns the report CSV in
 * `report_csv` (release with [`tdcm_string_free`]). `jobs == 0` uses one
 * thread per core. A non-zero `override_seed` replaces the seed.
 */
enum TdcmStatus tdcm_run_scenario_json(const char *scenario_json,
                                       size_t jobs,
                                       uint64_t override_seed,
                                       char **report_csv);

/**
 * Detects the dead-zone shift of one axis (0 = anterior-posterior,
 * 1 = right-left) on the simulated catheter of a scenario.
 */
enum TdcmStatus tdcm_detect_json(const char *scenario_json,
                                 int axis,
                                 struct TdcmShiftEstimate *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TDCM_H */
