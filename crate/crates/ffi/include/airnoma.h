/*
 * airnoma C API — fluid-antenna NOMA/AirFL uplink simulator.
 *
 * Conventions:
 *  - every fallible call returns AnStatus; AN_STATUS_OK is zero;
 *  - on failure, an_last_error_message() describes the most recent
 *    error on the calling thread;
 *  - handles (AnSystem, AnScene, AnPolicy) are opaque; each has one
 *    an_*_free, and every free accepts NULL;
 *  - out-pointers are written only on AN_STATUS_OK.
 */

#ifndef AIRNOMA_H
#define AIRNOMA_H

/* Generated by cbindgen from the airnoma-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum AnStatus {
  // Success; out-pointers have been written.
  AN_STATUS_OK = 0,
  // A required pointer argument was null.
  AN_STATUS_NULL_POINTER = 1,
  // An argument failed validation (range, length, or parse error).
  AN_STATUS_INVALID_ARGUMENT = 2,
  // A string argument was not valid UTF-8.
  AN_STATUS_INVALID_UTF8 = 3,
  // An underlying file operation failed.
  AN_STATUS_IO = 4,
  // An internal invariant failed; the message has details.
  AN_STATUS_RUNTIME = 5,
} AnStatus;

// Port-placement mode for the built-in random search.
typedef enum AnPlacement {
  // Port positions come from the searched action (fluid antenna).
  AN_PLACEMENT_FLUID = 0,
  // Port positions stay frozen at the uniform grid (fixed antenna).
  AN_PLACEMENT_FIXED_GRID = 1,
} AnPlacement;

// Opaque trained policy: the checkpoint's networks plus the system and
// learner configuration it was trained for.
typedef struct AnPolicy AnPolicy;

// Opaque scenario: user geometry and one block-fading realization,
// frozen at sampling time together with a snapshot of the system.
typedef struct AnScene AnScene;

// Opaque system configuration (user counts, ports, impairments, QoS).
typedef struct AnSystem AnSystem;

// Headline metrics of one evaluated decision. When the decision was
// degenerate (`penalized` and the rates are NaN) only `reward` is
// meaningful.
typedef struct AnMetrics {
  // Slot reward: bandwidth-normalized hybrid rate, or the penalty.
  double reward;
  // Weighted mixture of data and computation rates in bit/s.
  double hybrid_rate;
  // Sum of the NOMA user rates in bit/s.
  double noma_sum_rate;
  // Computation rate of the aggregation in bit/s.
  double airfl_rate;
  // Total aggregation mean squared error.
  double mse_total;
  // Received power `E|ŝ|²` of the reconstructed aggregate.
  double received_power;
  // Every constraint (rates, distortion, geometry, power) holds.
  bool feasible;
  // The reward is the penalty reward.
  bool penalized;
} AnMetrics;

// One complex number (Cartesian form).
typedef struct AnComplex {
  // Real part.
  double re;
  // Imaginary part.
  double im;
} AnComplex;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the most recent failing call on this thread; the empty
// string before any failure. The pointer stays valid until the next
// failing call on the same thread.
const char *an_last_error_message(void);

// Library version as a static NUL-terminated string (never freed).
const char *an_version(void);

// Frees a string previously returned through an out-pointer. Null is a
// no-op.
//
// # Safety
// `s` must be null or a pointer obtained from this library's
// string-returning calls, freed at most once.
void an_string_free(char *s);

// Creates the reference system configuration.
//
// # Safety
// `out` must be a valid pointer to writable storage.
enum AnStatus an_system_default(struct AnSystem **out);

// Creates the scaled-down desk configuration (fewer users and ports,
// meant for fast experiments).
//
// # Safety
// `out` must be a valid pointer to writable storage.
enum AnStatus an_system_desk(struct AnSystem **out);

// Parses a system configuration from TOML text. Absent fields keep
// their defaults; unknown fields and invalid values are rejected.
//
// # Safety
// `text` must be a NUL-terminated string; `out` must be writable.
enum AnStatus an_system_from_toml(const char *text, struct AnSystem **out);

// Serializes the configuration to TOML. The returned string is owned by
// the caller; release it with [`an_string_free`].
//
// # Safety
// `sys` must be a live handle; `out_text` must be writable.
enum AnStatus an_system_to_toml(const struct AnSystem *sys, char **out_text);

// Sets one numeric field by name (e.g. `"sic_residual"`, `"num_ports"`)
// and re-validates the configuration. Integral fields accept integral
// values; array fields are set through [`an_system_from_toml`] instead.
//
// # Safety
// `sys` must be a live handle; `field` must be NUL-terminated.
enum AnStatus an_system_set(struct AnSystem *sys, const char *field, double value);

// Reads one numeric field by name. Array fields are read through
// [`an_system_to_toml`] instead.
//
// # Safety
// `sys` must be a live handle; `field` must be NUL-terminated; `out`
// must be writable.
enum AnStatus an_system_get(const struct AnSystem *sys, const char *field, double *out);

// Reports the dimensions a caller needs to size buffers: observation
// length, action length, user count `K+N`, and port count `L`. Each
// out-pointer may be null to skip that value.
//
// # Safety
// `sys` must be a live handle; non-null out-pointers must be writable.
enum AnStatus an_system_dims(const struct AnSystem *sys,
                             size_t *out_state_dim,
                             size_t *out_action_dim,
                             size_t *out_users,
                             size_t *out_ports);

// Frees a system handle. Null is a no-op.
//
// # Safety
// `sys` must be null or a live handle, freed at most once.
void an_system_free(struct AnSystem *sys);

// Samples the scenario that [`an_search`] with the same seed optimizes
// over: user geometry and block fading on a derived stream. The scene
// snapshots the system, so later edits to `sys` do not affect it.
//
// # Safety
// `sys` must be a live handle; `out` must be writable.
enum AnStatus an_scene_sample(const struct AnSystem *sys, uint64_t seed, struct AnScene **out);

// Reads one user's placement: distance in meters, angle of arrival in
// radians, and population flag. Each out-pointer may be null.
//
// # Safety
// `scene` must be a live handle; non-null out-pointers must be writable.
enum AnStatus an_scene_user(const struct AnScene *scene,
                            size_t index,
                            double *out_distance,
                            double *out_angle,
                            bool *out_is_airfl);

// Scores one raw action on the scene: the action (entries in [−1, 1],
// length = action dimension) is decoded into a decision, channels are
// composed for its port positions from the frozen fading, and the slot
// reward plus headline metrics are written to `out`. Evaluations do not
// consume randomness, so any number of actions can be compared on one
// scene — an external optimizer's counterpart of [`an_search`].
//
// # Safety
// `scene` must be a live handle; `action` must point to `action_len`
// doubles; `out` must be writable.
enum AnStatus an_scene_evaluate(const struct AnScene *scene,
                                const double *action,
                                size_t action_len,
                                struct AnMetrics *out);

// Frees a scene handle. Null is a no-op.
//
// # Safety
// `scene` must be null or a live handle, freed at most once.
void an_scene_free(struct AnScene *scene);

// Uniform random search over `budget` candidate decisions on the scene
// derived from `seed` (see [`an_scene_sample`]). Writes the best
// candidate's metrics and, through the nullable buffers, its decision:
// beamformer (length = ports), port positions in wavelengths (length =
// ports), and per-user transmit powers in watts (length = users, AirFL
// users first). Non-null buffers must have exactly the stated lengths.
//
// # Safety
// `sys` must be a live handle; non-null out-pointers must point to
// writable storage of the declared lengths.
enum AnStatus an_search(const struct AnSystem *sys,
                        size_t budget,
                        uint64_t seed,
                        enum AnPlacement mode,
                        struct AnMetrics *out_metrics,
                        struct AnComplex *out_beamformer,
                        size_t beamformer_len,
                        double *out_positions,
                        size_t positions_len,
                        double *out_powers,
                        size_t powers_len);

// Loads a policy checkpoint written by the trainer.
//
// # Safety
// `path` must be a NUL-terminated file path; `out` must be writable.
enum AnStatus an_policy_load(const char *path, struct AnPolicy **out);

// Copies the system configuration the policy was trained for into a new
// [`AnSystem`] handle (evaluation must run on that environment).
//
// # Safety
// `policy` must be a live handle; `out` must be writable.
enum AnStatus an_policy_system(const struct AnPolicy *policy, struct AnSystem **out);

// Noise-free evaluation rollouts on the trained-for environment: writes
// each episode's mean reward into `out_rewards` (length = `episodes`).
// Deterministic per seed.
//
// # Safety
// `policy` must be a live handle; `out_rewards` must point to
// `rewards_len` writable doubles.
enum AnStatus an_policy_evaluate(const struct AnPolicy *policy,
                                 size_t episodes,
                                 uint64_t seed,
                                 double *out_rewards,
                                 size_t rewards_len);

// Frees a policy handle. Null is a no-op.
//
// # Safety
// `policy` must be null or a live handle, freed at most once.
void an_policy_free(struct AnPolicy *policy);

// Runs the federated loop over an ideal (noise-free) aggregation channel
// on a CSV corpus (header `f0,...,fD,label`; one sample per row, integer
// class label in the final column) and writes the per-round test
// accuracy into `out_accuracy` (length = `rounds`).
// `iid` selects the sharding: uniform shuffle, or label-skewed shards
// with 3 distinct labels per client. Other federated parameters stay at
// their defaults; richer setups (analog aggregation, trained links) are
// reachable through the `fl` subcommand of the CLI.
//
// # Safety
// `dataset_path` must be a NUL-terminated file path; `out_accuracy`
// must point to `accuracy_len` writable doubles.
enum AnStatus an_fl_run_ideal(const char *dataset_path,
                              size_t rounds,
                              size_t clients,
                              bool iid,
                              uint64_t seed,
                              double *out_accuracy,
                              size_t accuracy_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AIRNOMA_H */
