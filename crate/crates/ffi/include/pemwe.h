#ifndef PEMWE_H
#define PEMWE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PemweStatus {
  PEMWE_STATUS_OK = 0,
  PEMWE_STATUS_NULL_POINTER = 1,
  PEMWE_STATUS_CONFIG = 2,
  PEMWE_STATUS_NUMERICAL = 3,
  PEMWE_STATUS_IO = 4,
  PEMWE_STATUS_INVALID_ARGUMENT = 5,
  PEMWE_STATUS_PANIC = 6,
} PemweStatus;

/**
 * Run configuration.
 */
typedef struct PemweConfig PemweConfig;

/**
 * Trained network.
 */
typedef struct PemweModel PemweModel;

/**
 * Simulated trajectory.
 */
typedef struct PemweTrajectory PemweTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread. Empty after a
 * successful call. The pointer stays valid until the next call.
 */
const char *pemwe_last_error_message(void);

/**
 * Library version as a static string.
 */
const char *pemwe_version(void);

/**
 * Creates the default configuration.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum PemweStatus pemwe_config_default(struct PemweConfig **out);

/**
 * Parses a JSON configuration document. Missing keys take defaults.
 *
 * # Safety
 * `json` must be a nul-terminated string and `out` a valid pointer.
 */
enum PemweStatus pemwe_config_from_json(const char *json, struct PemweConfig **out);

/**
 * Loads a JSON configuration file.
 *
 * # Safety
 * `path` must be a nul-terminated string and `out` a valid pointer.
 */
enum PemweStatus pemwe_config_load(const char *path, struct PemweConfig **out);

/**
 * Overrides the number of training epochs.
 *
 * # Safety
 * `config` must be a live handle.
 */
enum PemweStatus pemwe_config_set_epochs(struct PemweConfig *config, size_t epochs);

/**
 * # Safety
 * `config` must be null or a handle not yet freed.
 */
void pemwe_config_free(struct PemweConfig *config);

/**
 * Simulates the trajectory at rate constant `k5` in m³/(mol s).
 * A negative `k5` selects the configured `k5_true`.
 *
 * # Safety
 * `config` must be a live handle and `out` a valid pointer.
 */
enum PemweStatus pemwe_simulate(const struct PemweConfig *config,
                                double k5,
                                struct PemweTrajectory **out);

/**
 * Number of stored time points.
 *
 * # Safety
 * `traj` must be a live handle and `len` a valid pointer.
 */
enum PemweStatus pemwe_trajectory_len(const struct PemweTrajectory *traj, size_t *len);

/**
 * Copies times (h), voltages (V) and thicknesses (cm) into caller buffers
 * of `capacity` elements each. Any buffer may be null to skip it.
 *
 * # Safety
 * Non-null buffers must hold `capacity` doubles.
 */
enum PemweStatus pemwe_trajectory_copy(const struct PemweTrajectory *traj,
                                       double *times,
                                       double *voltages,
                                       double *thicknesses,
                                       size_t capacity);

/**
 * # Safety
 * `traj` must be null or a handle not yet freed.
 */
void pemwe_trajectory_free(struct PemweTrajectory *traj);

/**
 * Simulates the configured experiment, samples the noisy training data and
 * trains a network. Blocks until training finishes.
 *
 * # Safety
 * `config` must be a live handle and `out` a valid pointer.
 */
enum PemweStatus pemwe_train(const struct PemweConfig *config, struct PemweModel **out);

/**
 * Loads a model checkpoint written by the `train` command.
 *
 * # Safety
 * `path` must be a nul-terminated string and `out` a valid pointer.
 */
enum PemweStatus pemwe_model_load(const char *path, struct PemweModel **out);

/**
 * Writes the model to `path`.
 *
 * # Safety
 * `model` must be a live handle and `path` a nul-terminated string.
 */
enum PemweStatus pemwe_model_save(const struct PemweModel *model, const char *path);

/**
 * Predicted voltage (V) and thickness (cm) at time `t` (h).
 *
 * # Safety
 * `model` must be a live handle; outputs must be valid pointers.
 */
enum PemweStatus pemwe_model_predict(const struct PemweModel *model,
                                     double t,
                                     double *voltage,
                                     double *thickness);

/**
 * Learned scaled rate constant; the physical value is `k5_hat * 1000`.
 *
 * # Safety
 * `model` must be a live handle and `k5_hat` a valid pointer.
 */
enum PemweStatus pemwe_model_k5_hat(const struct PemweModel *model, double *k5_hat);

/**
 * # Safety
 * `model` must be null or a handle not yet freed.
 */
void pemwe_model_free(struct PemweModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PEMWE_H */
