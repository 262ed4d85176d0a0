#ifndef ICT_H
#define ICT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum IctStatus {
  ICT_STATUS_OK = 0,
  ICT_STATUS_NULL_POINTER = 1,
  ICT_STATUS_INVALID_ARGUMENT = 2,
  ICT_STATUS_DIMENSION = 3,
  ICT_STATUS_NON_FINITE = 4,
  ICT_STATUS_PARSE = 5,
  ICT_STATUS_SCHEMA = 6,
  ICT_STATUS_INFEASIBLE_SPLIT = 7,
  ICT_STATUS_IO = 8,
  ICT_STATUS_PANIC = 99,
} IctStatus;

typedef enum IctMethod {
  ICT_METHOD_ICT = 0,
  ICT_METHOD_SUPERVISED = 1,
  ICT_METHOD_SUPERVISED_MIXUP = 2,
  ICT_METHOD_ICT_NO_TEACHER = 3,
} IctMethod;

// Opaque trained or loaded network.
typedef struct IctNetwork IctNetwork;

// Two-moons training run. Fill with `ict_train_config_default` first.
typedef struct IctTrainConfig {
  enum IctMethod method;
  uint64_t seed;
  size_t n;
  double noise;
  size_t labels_per_class;
  size_t unlabeled_count;
  size_t validation_count;
  size_t test_count;
  size_t epochs;
  double beta_alpha;
  double w_max;
  double ema_decay;
  double base_lr;
} IctTrainConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer stays
// valid until the next call into this library on the same thread.
const char *ict_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *ict_version(void);

// Loads a checkpoint file into a new handle.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum IctStatus ict_network_load(const char *path, struct IctNetwork **out);

// Releases a handle. Null is ignored.
//
// # Safety
// `net` must come from this library and not be used afterwards.
void ict_network_free(struct IctNetwork *net);

// # Safety
// `net` and `path` must be valid.
enum IctStatus ict_network_save(const struct IctNetwork *net, const char *path);

// Number of input features, or 0 for a null handle.
//
// # Safety
// `net` must be null or valid.
size_t ict_network_input_dim(const struct IctNetwork *net);

// Number of classes, or 0 for a null handle.
//
// # Safety
// `net` must be null or valid.
size_t ict_network_num_classes(const struct IctNetwork *net);

// Class probabilities for `rows` row-major inputs of width `cols`.
// `out` must hold `rows * num_classes` values; `out_len` is its capacity.
//
// # Safety
// `x` must point to `rows * cols` doubles and `out` to `out_len` doubles.
enum IctStatus ict_network_predict(const struct IctNetwork *net,
                                   const double *x,
                                   size_t rows,
                                   size_t cols,
                                   double *out,
                                   size_t out_len);

// Writes `n` two-moons points: `x` receives `2 n` row-major coordinates and
// `labels` receives `n` class indices.
//
// # Safety
// `x` must hold `2 n` doubles and `labels` `n` values.
enum IctStatus ict_two_moons(size_t n, double noise, uint64_t seed, double *x, size_t *labels);

// # Safety
// `out` must be valid.
enum IctStatus ict_train_config_default(struct IctTrainConfig *out);

// Generates two moons, trains, and returns the final evaluation network.
// `test_error` (optional) receives the held-out error in percent.
//
// # Safety
// `config` and `out` must be valid; `test_error` may be null.
enum IctStatus ict_train_two_moons(const struct IctTrainConfig *config,
                                   struct IctNetwork **out,
                                   double *test_error);

// Cosine-annealed learning rate at `step` of `total_steps`.
//
// # Safety
// `out` must be valid.
enum IctStatus ict_cosine_lr(size_t step, size_t total_steps, double base_lr, double *out);

// Consistency weight at `step` for a ramp of `ramp_steps`.
double ict_ramp_w(size_t step, size_t ramp_steps, double w_max);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ICT_H */
