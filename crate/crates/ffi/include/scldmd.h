/* Generated by cbindgen from crates/ffi. Do not edit. */

#ifndef SCLDMD_H
#define SCLDMD_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum ScldmdStatus {
  SCLDMD_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  SCLDMD_STATUS_NULL_POINTER = 1,
  /**
   * Invalid argument or configuration.
   */
  SCLDMD_STATUS_ARGUMENT = 2,
  /**
   * Unreadable, malformed or inconsistent data or file.
   */
  SCLDMD_STATUS_FORMAT = 3,
  /**
   * Numerical failure: kernel overflow, degenerate Gram matrix, divergence.
   */
  SCLDMD_STATUS_NUMERICAL = 4,
  /**
   * An internal panic was caught at the boundary.
   */
  SCLDMD_STATUS_PANIC = 5,
} ScldmdStatus;

typedef enum ScldmdWaveform {
  SCLDMD_WAVEFORM_SIN = 0,
  SCLDMD_WAVEFORM_COS = 1,
} ScldmdWaveform;

/**
 * Opaque dataset handle.
 */
typedef struct ScldmdDataset ScldmdDataset;

/**
 * Opaque identified-model handle.
 */
typedef struct ScldmdModel ScldmdModel;

/**
 * Opaque trajectory handle.
 */
typedef struct ScldmdTrajectory ScldmdTrajectory;

/**
 * `amplitude · wave(frequency · t + phase)` added to control `channel`.
 */
typedef struct ScldmdSinusoid {
  size_t channel;
  double amplitude;
  double frequency;
  double phase;
  enum ScldmdWaveform waveform;
} ScldmdSinusoid;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null if none.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *scldmd_last_error(void);

/**
 * Build a trajectory from `len` samples: `times[len]`, `states[len·n]` and
 * `controls[len·m]`, both row-major.
 */
enum ScldmdStatus scldmd_trajectory_new(size_t len,
                                        size_t n,
                                        size_t m,
                                        const double *times,
                                        const double *states,
                                        const double *controls,
                                        struct ScldmdTrajectory **out);

void scldmd_trajectory_free(struct ScldmdTrajectory *traj);

/**
 * Sample count, state dimension and control dimension; any output may be null.
 */
enum ScldmdStatus scldmd_trajectory_dims(const struct ScldmdTrajectory *traj,
                                         size_t *len,
                                         size_t *n,
                                         size_t *m);

/**
 * Borrowed pointer to the `len` sample times; valid until the trajectory is freed.
 */
const double *scldmd_trajectory_times(const struct ScldmdTrajectory *traj);

/**
 * Borrowed pointer to the `len·n` row-major states.
 */
const double *scldmd_trajectory_states(const struct ScldmdTrajectory *traj);

/**
 * Borrowed pointer to the `len·m` row-major controls.
 */
const double *scldmd_trajectory_controls(const struct ScldmdTrajectory *traj);

/**
 * Read a dataset CSV (`traj_id,t,x1..xn,u1..um`).
 */
enum ScldmdStatus scldmd_dataset_load(const char *path, struct ScldmdDataset **out);

/**
 * Collect `count` trajectories (copied) into a dataset.
 */
enum ScldmdStatus scldmd_dataset_new(const struct ScldmdTrajectory *const *trajectories,
                                     size_t count,
                                     struct ScldmdDataset **out);

enum ScldmdStatus scldmd_dataset_save(const struct ScldmdDataset *ds, const char *path);

/**
 * Trajectory count, state dimension and control dimension; any output may be null.
 */
enum ScldmdStatus scldmd_dataset_dims(const struct ScldmdDataset *ds,
                                      size_t *count,
                                      size_t *n,
                                      size_t *m);

void scldmd_dataset_free(struct ScldmdDataset *ds);

/**
 * Identify a model. `mu_v` holds one scale per channel (`m + 1` values) or a
 * single shared scale. A negative `max_modes` keeps every retained mode.
 */
enum ScldmdStatus scldmd_identify(const struct ScldmdDataset *ds,
                                  double mu_d,
                                  const double *mu_v,
                                  size_t mu_v_len,
                                  double rel_tol,
                                  int64_t max_modes,
                                  struct ScldmdModel **out);

enum ScldmdStatus scldmd_model_load(const char *path, struct ScldmdModel **out);

enum ScldmdStatus scldmd_model_save(const struct ScldmdModel *model, const char *path);

void scldmd_model_free(struct ScldmdModel *model);

/**
 * State dimension, control dimension, rank and training-trajectory count;
 * any output may be null.
 */
enum ScldmdStatus scldmd_model_dims(const struct ScldmdModel *model,
                                    size_t *n,
                                    size_t *m,
                                    size_t *rank,
                                    size_t *size);

/**
 * Write `[f̂(x) ĝ(x)]` (`n × (m+1)`, row-major) into `out[out_len]`.
 */
enum ScldmdStatus scldmd_model_vector_field(const struct ScldmdModel *model,
                                            const double *x,
                                            size_t x_len,
                                            double *out,
                                            size_t out_len);

/**
 * Write the singular values (non-increasing, zero past the rank) into
 * `out[out_len]`, where `out_len` is the training-trajectory count.
 */
enum ScldmdStatus scldmd_model_spectrum(const struct ScldmdModel *model,
                                        double *out,
                                        size_t out_len);

/**
 * Predict under a sum of sinusoids; channels without terms are zero.
 */
enum ScldmdStatus scldmd_model_predict_sinusoids(const struct ScldmdModel *model,
                                                 const double *x0,
                                                 size_t x0_len,
                                                 const struct ScldmdSinusoid *terms,
                                                 size_t term_count,
                                                 double horizon,
                                                 double dt,
                                                 struct ScldmdTrajectory **out);

/**
 * Predict under a sampled input: `times[count]` strictly increasing,
 * `values[count·m]` row-major, linearly interpolated and held at the ends.
 */
enum ScldmdStatus scldmd_model_predict_sampled(const struct ScldmdModel *model,
                                               const double *x0,
                                               size_t x0_len,
                                               const double *times,
                                               const double *values,
                                               size_t count,
                                               double horizon,
                                               double dt,
                                               struct ScldmdTrajectory **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SCLDMD_H */
