#ifndef LOORA_H
#define LOORA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

#define LOORA_METHOD_HT 0

#define LOORA_METHOD_DM 1

#define LOORA_METHOD_ADJ 2

#define LOORA_METHOD_INT 3

#define LOORA_METHOD_RIDGE_REG 4

#define LOORA_METHOD_LOORA_HT 5

#define LOORA_METHOD_LOORA_DM 6

// `lambda_value` is the penalty itself.
#define LOORA_LAMBDA_FIXED 0

// `lambda_value` is `c` in `lambda = c * max_i ||x_i||^2`.
#define LOORA_LAMBDA_AUTO 1

typedef enum LooraStatus {
  LOORA_STATUS_OK = 0,
  LOORA_STATUS_NULL_POINTER = 1,
  LOORA_STATUS_INVALID_INPUT = 2,
  LOORA_STATUS_SPEC_MISMATCH = 3,
  LOORA_STATUS_NUMERIC = 4,
  LOORA_STATUS_TOO_LARGE = 5,
  LOORA_STATUS_PANIC = 6,
} LooraStatus;

// Finite population with both potential outcomes.
typedef struct LooraPopulation LooraPopulation;

// Observed experiment: covariates, outcomes, assignment and design.
typedef struct LooraSample LooraSample;

// Point estimate with its HC0 variance and normal interval.
typedef struct LooraEstimate {
  double tau_hat;
  double var_hat;
  double ci_low;
  double ci_high;
  double level;
  double lambda_used;
} LooraEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Observed sample under simple random assignment with per-unit probabilities `p`.
//
// # Safety
// `x` holds `n * k` doubles, `y` and `p` hold `n` doubles, `d` holds `n` bytes
// (0 or 1), and `out` is writable.
enum LooraStatus loora_sample_new_simple(const double *x,
                                         uintptr_t n,
                                         uintptr_t k,
                                         const double *y,
                                         const uint8_t *d,
                                         const double *p,
                                         struct LooraSample **out);

// Observed sample under complete random assignment; the treated count is taken from `d`.
//
// # Safety
// As for [`loora_sample_new_simple`], without `p`.
enum LooraStatus loora_sample_new_complete(const double *x,
                                           uintptr_t n,
                                           uintptr_t k,
                                           const double *y,
                                           const uint8_t *d,
                                           struct LooraSample **out);

// # Safety
// `s` is NULL or a handle from a `loora_sample_new_*` function not yet freed.
void loora_sample_free(struct LooraSample *s);

// Estimate, HC0 variance and confidence interval for one method.
//
// # Safety
// `s` is a live sample handle and `out` is writable.
enum LooraStatus loora_estimate(const struct LooraSample *s,
                                uint32_t method_code,
                                uint32_t lambda_kind,
                                double lambda_value,
                                double level,
                                struct LooraEstimate *out);

// # Safety
// `x` holds `n * k` doubles, `y1` and `y0` hold `n` doubles, `out` is writable.
enum LooraStatus loora_population_new(const double *x,
                                      uintptr_t n,
                                      uintptr_t k,
                                      const double *y1,
                                      const double *y0,
                                      struct LooraPopulation **out);

// # Safety
// `pop` is NULL or a live population handle.
void loora_population_free(struct LooraPopulation *pop);

// # Safety
// `pop` is a live population handle, `out` is writable.
enum LooraStatus loora_population_tau(const struct LooraPopulation *pop, double *out);

// Exact variance of LOORA-HT at penalty `lambda` under probabilities `p`.
//
// # Safety
// `pop` is a live population handle, `p` holds `n` doubles, `out` is writable.
enum LooraStatus loora_ht_exact_variance(const struct LooraPopulation *pop,
                                         const double *p,
                                         double lambda,
                                         double *out);

// Exact variance of LOORA-DM at penalty `lambda` with `n_t` treated units.
//
// # Safety
// `pop` is a live population handle, `out` is writable.
enum LooraStatus loora_dm_exact_variance(const struct LooraPopulation *pop,
                                         uintptr_t n_t,
                                         double lambda,
                                         double *out);

// Message of the last failure on this thread; empty after a success.
//
// The pointer stays valid until the next `loora_*` call on the same thread.
const char *loora_last_error(void);

// Row index attached to the last failure on this thread, or -1.
int64_t loora_last_error_row(void);

// Library version as a static NUL-terminated string.
const char *loora_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LOORA_H */
