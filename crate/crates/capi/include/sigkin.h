#ifndef SIGKIN_H
#define SIGKIN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Return status of every fallible call.
 */
typedef enum SigkinStatus {
  SigkinStatus_Ok = 0,
  SigkinStatus_NullPointer = 1,
  SigkinStatus_InvalidUtf8 = 2,
  SigkinStatus_Io = 3,
  SigkinStatus_ParseError = 4,
  SigkinStatus_InvalidData = 5,
  SigkinStatus_NumericalFailure = 6,
} SigkinStatus;

/**
 * Feature group selector for scoring.
 */
typedef enum SigkinGroup {
  SigkinGroup_Theta = 0,
  SigkinGroup_Omega = 1,
  SigkinGroup_Tau = 2,
} SigkinGroup;

typedef struct SigkinChain SigkinChain;

typedef struct SigkinFeatures SigkinFeatures;

typedef struct SigkinModel SigkinModel;

typedef struct SigkinSignature SigkinSignature;

/**
 * Two-stage verification score of a questioned signature.
 */
typedef struct SigkinScore {
  /**
   * Minimum DTW distance over the reference set.
   */
  double s_r;
  /**
   * Warping-path length of the minimizing alignment.
   */
  uintptr_t path_len;
  /**
   * s_r normalized by path length (random-forgery score).
   */
  double s_hat_1;
  /**
   * s_r normalized by the reference factor mu_R (skilled-forgery score).
   */
  double s_hat_2;
  double mu_r;
} SigkinScore;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Last error message for this thread; valid until the next failing call.
 */
const char *sigkin_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sigkin_version(void);

/**
 * Creates the bundled UR5e-style chain.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum SigkinStatus sigkin_chain_default(struct SigkinChain **out);

/**
 * Loads and validates a chain description file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` a valid pointer.
 */
enum SigkinStatus sigkin_chain_load(const char *path, struct SigkinChain **out);

/**
 * # Safety
 * `chain` must come from a sigkin constructor and not be freed twice.
 */
void sigkin_chain_free(struct SigkinChain *chain);

/**
 * Reads a signature file in the canonical `t x y [p]` format.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` a valid pointer.
 */
enum SigkinStatus sigkin_signature_read(const char *path, struct SigkinSignature **out);

/**
 * Builds a signature from parallel arrays. `pressure` may be NULL.
 *
 * # Safety
 * `t`, `x`, `y` (and `pressure` when non-NULL) must point to `len` doubles.
 */
enum SigkinStatus sigkin_signature_from_arrays(const double *t,
                                               const double *x,
                                               const double *y,
                                               const double *pressure,
                                               uintptr_t len,
                                               struct SigkinSignature **out);

/**
 * Number of samples in the signature.
 *
 * # Safety
 * `sig` must be a live handle.
 */
uintptr_t sigkin_signature_len(const struct SigkinSignature *sig);

/**
 * # Safety
 * `sig` must come from a sigkin constructor and not be freed twice.
 */
void sigkin_signature_free(struct SigkinSignature *sig);

/**
 * Replays a signature on the simulated arm with the default workspace
 * placement, producing ground-truth joint features.
 *
 * # Safety
 * `chain` and `sig` must be live handles; `out` a valid pointer.
 */
enum SigkinStatus sigkin_replay(const struct SigkinChain *chain,
                                const struct SigkinSignature *sig,
                                struct SigkinFeatures **out);

/**
 * Loads a trained estimator model file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` a valid pointer.
 */
enum SigkinStatus sigkin_model_load(const char *path, struct SigkinModel **out);

/**
 * # Safety
 * `model` must come from a sigkin constructor and not be freed twice.
 */
void sigkin_model_free(struct SigkinModel *model);

/**
 * Estimates joint features from a pen trajectory with a trained model.
 *
 * # Safety
 * `model` and `sig` must be live handles; `out` a valid pointer.
 */
enum SigkinStatus sigkin_estimate(const struct SigkinModel *model,
                                  const struct SigkinSignature *sig,
                                  struct SigkinFeatures **out);

/**
 * Number of rows (samples) in a feature series.
 *
 * # Safety
 * `features` must be a live handle.
 */
uintptr_t sigkin_features_rows(const struct SigkinFeatures *features);

/**
 * 1 when the features came from the simulated arm, 0 when estimated.
 *
 * # Safety
 * `features` must be a live handle.
 */
int32_t sigkin_features_is_simulated(const struct SigkinFeatures *features);

/**
 * Copies one channel into `out[0..rows]`. Channels 0..6 are joint angles,
 * 6..12 angular velocities, 12..18 torques; channel 18 is the timestamp.
 *
 * # Safety
 * `features` must be a live handle and `out` must hold `len` doubles.
 */
enum SigkinStatus sigkin_features_channel(const struct SigkinFeatures *features,
                                          uintptr_t channel,
                                          double *out,
                                          uintptr_t len);

/**
 * # Safety
 * `features` must come from a sigkin constructor and not be freed twice.
 */
void sigkin_features_free(struct SigkinFeatures *features);

/**
 * Scores a questioned feature series against a reference set on one feature
 * group. At least two references are required.
 *
 * # Safety
 * `questioned` must be a live handle, `refs` must point to `n_refs` live
 * handles, and `out` must be a valid pointer.
 */
enum SigkinStatus sigkin_score(enum SigkinGroup group,
                               const struct SigkinFeatures *questioned,
                               const struct SigkinFeatures *const *refs,
                               uintptr_t n_refs,
                               struct SigkinScore *out);

/**
 * Equal error rate of two score lists (lower score = more genuine).
 *
 * # Safety
 * `genuine` and `impostor` must point to `n_genuine` / `n_impostor`
 * doubles; `out` must be a valid pointer.
 */
enum SigkinStatus sigkin_eer(const double *genuine,
                             uintptr_t n_genuine,
                             const double *impostor,
                             uintptr_t n_impostor,
                             double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SIGKIN_H */
