#ifndef THERMODAMAGE_H
#define THERMODAMAGE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Nodal arrays that can be copied out of a simulation.
 */
typedef enum TdField {
  TD_FIELD_DISPLACEMENT = 0,
  TD_FIELD_VELOCITY = 1,
  TD_FIELD_ENTHALPY = 2,
  TD_FIELD_DAMAGE = 3,
  /**
   * Multiplier of `χ ≥ 0` from the last step, zeros before the first.
   */
  TD_FIELD_MULTIPLIER = 4,
} TdField;

typedef enum TdStatus {
  TD_STATUS_OK = 0,
  TD_STATUS_NULL_POINTER = 1,
  TD_STATUS_INVALID_UTF8 = 2,
  TD_STATUS_CONFIG = 3,
  TD_STATUS_DOMAIN = 4,
  TD_STATUS_SOLVER = 5,
  TD_STATUS_RUN_ABORTED = 6,
  TD_STATUS_IO = 7,
  TD_STATUS_BUFFER_TOO_SMALL = 8,
  TD_STATUS_FINISHED = 9,
  TD_STATUS_PANIC = 10,
} TdStatus;

/**
 * Opaque parsed and validated run configuration.
 */
typedef struct TdConfig TdConfig;

/**
 * Opaque run in progress.
 */
typedef struct TdSimulation TdSimulation;

/**
 * Summary of the last accepted step.
 */
typedef struct TdStepSummary {
  uintptr_t step;
  double t;
  double tau;
  uintptr_t tau_halvings;
  uintptr_t outer_iterations;
  double cancel_resid;
  /**
   * Energy ledger left-hand side minus right-hand side.
   */
  double energy_excess;
  double energy_scale;
  double w_min;
  double chi_min;
  double chi_max;
} TdStepSummary;

typedef struct TdExponents {
  int admissible;
  /**
   * NaN when inadmissible.
   */
  double r;
  double s;
  double s_star_star;
} TdExponents;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *td_version(void);

/**
 * Length in bytes of the last error message of this thread, without the
 * terminating NUL; zero after a successful call.
 */
uintptr_t td_last_error_length(void);

/**
 * Copies the last error message of this thread into `buf` with a
 * terminating NUL. Does not reset the stored message.
 *
 * # Safety
 * `buf` must be valid for `cap` bytes.
 */
enum TdStatus td_last_error_message(char *buf, uintptr_t cap);

/**
 * Reads and validates a TOML configuration file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` valid for one write.
 */
enum TdStatus td_config_load(const char *path, struct TdConfig **out);

/**
 * Parses and validates a configuration held in memory.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` valid for one write.
 */
enum TdStatus td_config_parse(const char *text, struct TdConfig **out);

/**
 * # Safety
 * `config` must be null or a handle from `td_config_load`/`td_config_parse`
 * that has not been freed.
 */
void td_config_free(struct TdConfig *config);

/**
 * Replaces the time step of a configuration.
 *
 * # Safety
 * `config` must be a live configuration handle.
 */
enum TdStatus td_config_set_tau(struct TdConfig *config, double tau);

/**
 * # Safety
 * `config` must be a live configuration handle and `out` valid for one write.
 */
enum TdStatus td_config_node_count(const struct TdConfig *config, uintptr_t *out);

/**
 * Runs a configuration to its final time and writes time series,
 * snapshots and the audit into `out_dir`. `all_pass` is set to 1 when every
 * audit verdict passes.
 *
 * # Safety
 * `config` must be a live handle, `out_dir` a NUL-terminated string and
 * `all_pass` valid for one write.
 */
enum TdStatus td_run_single(const struct TdConfig *config, const char *out_dir, int *all_pass);

/**
 * Starts a simulation at the initial state of a configuration. The
 * configuration may be freed afterwards.
 *
 * # Safety
 * `config` must be a live handle and `out` valid for one write.
 */
enum TdStatus td_simulation_new(const struct TdConfig *config, struct TdSimulation **out);

/**
 * # Safety
 * `sim` must be null or a live simulation handle.
 */
void td_simulation_free(struct TdSimulation *sim);

/**
 * Takes one accepted step; `finished` is set to 1 once the final time is
 * reached. Returns `Finished` when called after that.
 *
 * # Safety
 * `sim` must be a live handle; `finished` may be null.
 */
enum TdStatus td_simulation_step(struct TdSimulation *sim, int *finished);

/**
 * Steps until the final time.
 *
 * # Safety
 * `sim` must be a live handle.
 */
enum TdStatus td_simulation_run(struct TdSimulation *sim);

/**
 * # Safety
 * `sim` must be a live handle; `t` and `steps` may be null.
 */
enum TdStatus td_simulation_progress(const struct TdSimulation *sim, double *t, uintptr_t *steps);

/**
 * Copies a nodal field of the current state. Vector fields are stored
 * node-major, `dim` components per node.
 *
 * # Safety
 * `sim` must be a live handle, `buf` valid for `cap` writes and `len` for
 * one write.
 */
enum TdStatus td_simulation_copy_field(const struct TdSimulation *sim,
                                       enum TdField field,
                                       double *buf,
                                       uintptr_t cap,
                                       uintptr_t *len);

/**
 * Summary of the last accepted step; fails with `Domain` before the first
 * step.
 *
 * # Safety
 * `sim` must be a live handle and `out` valid for one write.
 */
enum TdStatus td_simulation_last_step(const struct TdSimulation *sim, struct TdStepSummary *out);

/**
 * Admissibility of `(σ, q, q₀)` and the derived integrability exponents.
 * Inadmissible input is not an error: `admissible` is 0 and the reason is
 * left in the last-error slot.
 *
 * # Safety
 * `out` must be valid for one write.
 */
enum TdStatus td_validate_exponents(double sigma, double q, double q0, struct TdExponents *out);

/**
 * Writes the integrability bootstrap trace for `p > 3` into `buf`; `len`
 * receives the trace length.
 *
 * # Safety
 * `buf` must be valid for `cap` writes and `len` for one write.
 */
enum TdStatus td_h2_bootstrap(double p, double *buf, uintptr_t cap, uintptr_t *len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* THERMODAMAGE_H */
