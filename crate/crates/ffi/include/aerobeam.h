#ifndef AEROBEAM_H
#define AEROBEAM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of a fallible call.
 */
typedef enum AbStatus {
  AB_STATUS_OK = 0,
  AB_STATUS_NULL_POINTER = 1,
  AB_STATUS_INVALID_ARGUMENT = 2,
  AB_STATUS_CONFIG = 3,
  AB_STATUS_CHECKPOINT_MISMATCH = 4,
  AB_STATUS_CHECKPOINT_FORMAT = 5,
  AB_STATUS_DIVERGED = 6,
  AB_STATUS_IO = 7,
  AB_STATUS_DIMENSION = 8,
  AB_STATUS_NUMERICAL = 9,
  AB_STATUS_PANIC = 10,
} AbStatus;

/**
 * Beamformer used by [`ab_env_evaluate_baseline`] and [`ab_evaluate`].
 */
typedef enum AbMethod {
  AB_METHOD_ZF = 0,
  AB_METHOD_MRT = 1,
  /**
   * The policy passed alongside, sampling actions.
   */
  AB_METHOD_DRL_SAMPLE = 2,
  /**
   * The policy passed alongside, acting with its mean.
   */
  AB_METHOD_DRL_MEAN = 3,
} AbMethod;

/**
 * Run configuration.
 */
typedef struct AbConfig AbConfig;

/**
 * One simulated network.
 */
typedef struct AbEnv AbEnv;

/**
 * A trained (or freshly initialised) pair of actors.
 */
typedef struct AbPolicy AbPolicy;

/**
 * Rates of one slot.
 */
typedef struct AbRates {
  /**
   * Sum over users of the dual-connectivity rate, bps/Hz.
   */
  double sum_rate;
  /**
   * Mean user rate (the shared reward), bps/Hz.
   */
  double reward;
} AbRates;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *ab_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ab_version(void);

/**
 * Default (full-scale) configuration.
 */
struct AbConfig *ab_config_default(void);

/**
 * Parses a TOML run configuration.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` a valid pointer.
 */
enum AbStatus ab_config_from_toml(const char *toml, struct AbConfig **out);

/**
 * Serialises a configuration to TOML. Free the result with
 * [`ab_string_free`].
 *
 * # Safety
 * `cfg` must come from this library; `out` must be valid.
 */
enum AbStatus ab_config_to_toml(const struct AbConfig *cfg, char **out);

/**
 * # Safety
 * `cfg` must come from this library.
 */
enum AbStatus ab_config_set_seed(struct AbConfig *cfg, uint64_t seed);

/**
 * Sets the number of training episodes.
 *
 * # Safety
 * `cfg` must come from this library.
 */
enum AbStatus ab_config_set_episodes(struct AbConfig *cfg, size_t episodes);

/**
 * # Safety
 * `cfg` must come from this library or be null.
 */
void ab_config_free(struct AbConfig *cfg);

/**
 * # Safety
 * `s` must come from this library or be null.
 */
void ab_string_free(char *s);

/**
 * Creates an environment. Call [`ab_env_reset`] before stepping.
 *
 * # Safety
 * `cfg` must come from this library; `out` must be valid.
 */
enum AbStatus ab_env_new(const struct AbConfig *cfg, struct AbEnv **out);

/**
 * # Safety
 * `env` must come from this library or be null.
 */
void ab_env_free(struct AbEnv *env);

/**
 * Starts an episode whose randomness derives from `(seed, episode)`.
 *
 * # Safety
 * `env` must come from this library.
 */
enum AbStatus ab_env_reset(struct AbEnv *env, uint64_t seed, uint64_t episode);

/**
 * Moves users one slot and advances the channels.
 *
 * # Safety
 * `env` must come from this library.
 */
enum AbStatus ab_env_advance(struct AbEnv *env);

/**
 * Number of `double`s in a full beam buffer (see the crate docs).
 *
 * # Safety
 * `env` must come from this library.
 */
size_t ab_env_beam_len(const struct AbEnv *env);

/**
 * Rates of the current slot under ZF or MRT beams from perfect CSI.
 *
 * # Safety
 * `env` must come from this library and have been reset; `out` valid.
 */
enum AbStatus ab_env_evaluate_baseline(const struct AbEnv *env,
                                       enum AbMethod method,
                                       struct AbRates *out);

/**
 * Rates of the current slot under caller-supplied beams, which are first
 * projected onto the power budgets.
 *
 * # Safety
 * `env` must come from this library and have been reset; `beams` must
 * point to `len` doubles; `out` valid.
 */
enum AbStatus ab_env_evaluate_beams(const struct AbEnv *env,
                                    const double *beams,
                                    size_t len,
                                    struct AbRates *out);

/**
 * Copies the true channel of (`bs`, `user`) as interleaved re/im into
 * `out`, which must hold `2 × antennas(bs)` doubles.
 *
 * # Safety
 * `env` must come from this library; `out` must point to `len` doubles.
 */
enum AbStatus ab_env_channel(const struct AbEnv *env,
                             size_t bs,
                             size_t user,
                             double *out,
                             size_t len);

/**
 * Loads a checkpoint.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` valid.
 */
enum AbStatus ab_policy_load(const char *path, struct AbPolicy **out);

/**
 * # Safety
 * `policy` must come from this library or be null.
 */
void ab_policy_free(struct AbPolicy *policy);

/**
 * Trains both actors. When `checkpoint_path` is non-null the final
 * checkpoint is written there.
 *
 * # Safety
 * `cfg` must come from this library; `checkpoint_path` null or a
 * NUL-terminated string; `out` valid.
 */
enum AbStatus ab_train(const struct AbConfig *cfg,
                       const char *checkpoint_path,
                       struct AbPolicy **out);

/**
 * Evaluates a method over `episodes` paired-seed episodes and writes the
 * per-slot mean sum-rate into `out_mean` (`len` must equal the episode
 * length `T`). `policy` is required for the DRL methods and ignored
 * otherwise.
 *
 * # Safety
 * `cfg` must come from this library; `policy` null or from this library;
 * `out_mean` must point to `len` doubles.
 */
enum AbStatus ab_evaluate(const struct AbConfig *cfg,
                          const struct AbPolicy *policy,
                          enum AbMethod method,
                          size_t episodes,
                          double *out_mean,
                          size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AEROBEAM_H */
