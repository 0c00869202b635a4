#ifndef UNIVFB_H
#define UNIVFB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum UfbMetric {
  UFB_METRIC_LZ78 = 0,
  UFB_METRIC_KT = 1,
} UfbMetric;

typedef enum UfbStatus {
  UFB_STATUS_OK = 0,
  UFB_STATUS_NULL_POINTER = 1,
  UFB_STATUS_INVALID_ARGUMENT = 2,
  UFB_STATUS_IO = 3,
  UFB_STATUS_INVARIANT = 4,
  UFB_STATUS_PANIC = 5,
} UfbStatus;

/**
 * Sequential KT mixture over block lengths `1..=k_max`.
 */
typedef struct UfbKt UfbKt;

/**
 * Sequential LZ78 coder.
 */
typedef struct UfbLz78 UfbLz78;

/**
 * A noise sequence over an alphabet `{0..q-1}`.
 */
typedef struct UfbNoise UfbNoise;

typedef struct UfbSessionConfig {
  size_t n;
  uint32_t q;
  uint32_t k_bits;
  double epsilon;
  uint64_t seed;
  enum UfbMetric metric;
  /**
   * Deepest KT block length; 0 picks the default for `n`.
   */
  size_t kt_k_max;
} UfbSessionConfig;

typedef struct UfbSessionSummary {
  size_t blocks;
  uint64_t bits;
  double r_act;
  double r_emp;
  double rate_floor;
  double l_t_noise;
  bool error;
  bool floor_violated;
} UfbSessionSummary;

typedef struct UfbNStar {
  double lower;
  /**
   * Infinite when `upper_unbounded`.
   */
  double upper;
  bool upper_unbounded;
  bool saturated;
} UfbNStar;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next failing call on the same thread.
 */
const char *ufb_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ufb_version(void);

/**
 * Generates `n` symbols from a spec string such as `bern:p=0.11,seed=4`.
 *
 * # Safety
 * `spec` must be a NUL-terminated string; `out` must be writable.
 */
enum UfbStatus ufb_noise_generate(const char *spec,
                                  uint32_t q,
                                  size_t n,
                                  uint64_t seed,
                                  struct UfbNoise **out);

/**
 * Copies `len` symbols into a new noise handle.
 *
 * # Safety
 * `data` must point to `len` readable bytes (may be NULL when `len` is 0);
 * `out` must be writable.
 */
enum UfbStatus ufb_noise_from_symbols(uint32_t q,
                                      const uint8_t *data,
                                      size_t len,
                                      struct UfbNoise **out);

/**
 * Reads a MODZ noise file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum UfbStatus ufb_noise_read(const char *path, struct UfbNoise **out);

/**
 * Writes a MODZ noise file atomically.
 *
 * # Safety
 * `noise` must be a live handle; `path` a NUL-terminated string.
 */
enum UfbStatus ufb_noise_write(const struct UfbNoise *noise, const char *path);

/**
 * Number of symbols, or 0 for NULL.
 *
 * # Safety
 * `noise` must be NULL or a live handle.
 */
size_t ufb_noise_len(const struct UfbNoise *noise);

/**
 * Alphabet size, or 0 for NULL.
 *
 * # Safety
 * `noise` must be NULL or a live handle.
 */
uint32_t ufb_noise_q(const struct UfbNoise *noise);

/**
 * Copies the symbols into `buf`, which must hold `ufb_noise_len` bytes.
 *
 * # Safety
 * `noise` must be a live handle; `buf` must point to `cap` writable bytes.
 */
enum UfbStatus ufb_noise_copy(const struct UfbNoise *noise, uint8_t *buf, size_t cap);

/**
 * # Safety
 * `noise` must be NULL or a handle not yet freed.
 */
void ufb_noise_free(struct UfbNoise *noise);

/**
 * # Safety
 * `out` must be writable.
 */
enum UfbStatus ufb_lz78_new(uint32_t q, struct UfbLz78 **out);

/**
 * # Safety
 * `coder` must be a live handle.
 */
enum UfbStatus ufb_lz78_feed(struct UfbLz78 *coder, uint8_t symbol);

/**
 * Unterminated and terminated code lengths in bits.
 *
 * # Safety
 * `coder` must be a live handle; `l_s` and `l_t` must be writable.
 */
enum UfbStatus ufb_lz78_lengths(const struct UfbLz78 *coder, uint64_t *l_s, uint64_t *l_t);

/**
 * # Safety
 * `coder` must be NULL or a handle not yet freed.
 */
void ufb_lz78_free(struct UfbLz78 *coder);

/**
 * # Safety
 * `out` must be writable.
 */
enum UfbStatus ufb_kt_new(uint32_t q, size_t k_max, struct UfbKt **out);

/**
 * # Safety
 * `coder` must be a live handle.
 */
enum UfbStatus ufb_kt_feed(struct UfbKt *coder, uint8_t symbol);

/**
 * `-log2` of the mixture probability of everything fed so far.
 *
 * # Safety
 * `coder` must be a live handle; `bits` must be writable.
 */
enum UfbStatus ufb_kt_code_length(const struct UfbKt *coder, double *bits);

/**
 * # Safety
 * `coder` must be NULL or a handle not yet freed.
 */
void ufb_kt_free(struct UfbKt *coder);

/**
 * Runs one feedback session over `noise` (whose length must equal `n`)
 * with messages drawn from the config seed.
 *
 * # Safety
 * All pointers must be valid; `noise` must be a live handle.
 */
enum UfbStatus ufb_session_run(const struct UfbSessionConfig *config,
                               const struct UfbNoise *noise,
                               struct UfbSessionSummary *out);

/**
 * Entropy of the empirical distribution of the first `b` `k`-blocks.
 *
 * # Safety
 * `noise` must be a live handle; `bits` must be writable.
 */
enum UfbStatus ufb_collapsed_entropy(const struct UfbNoise *noise,
                                     size_t k,
                                     size_t b,
                                     double *bits);

/**
 * # Safety
 * `out` must be writable.
 */
enum UfbStatus ufb_binary_entropy(double p, double *out);

/**
 * `max(0, (1-eps) r - h(eps)/block_len)`.
 */
double ufb_effective_rate(double r, double eps, size_t block_len);

/**
 * # Safety
 * `out` must be writable.
 */
enum UfbStatus ufb_n_star_bounds(size_t k, double delta, uint16_t q, struct UfbNStar *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* UNIVFB_H */
