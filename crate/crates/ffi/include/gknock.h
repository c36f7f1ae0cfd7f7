#ifndef GKNOCK_H
#define GKNOCK_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GkStatus {
  GK_STATUS_OK = 0,
  GK_STATUS_NULL_POINTER = 1,
  GK_STATUS_INVALID_ARGUMENT = 2,
  GK_STATUS_DIMENSION_MISMATCH = 3,
  GK_STATUS_INVALID_PARTITION = 4,
  GK_STATUS_INVALID_LEVEL = 5,
  GK_STATUS_INVALID_COUNTS = 6,
  GK_STATUS_DEGENERATE_INPUT = 7,
  GK_STATUS_NOT_POSITIVE_DEFINITE = 8,
  GK_STATUS_DEGENERATE_COVARIANCE = 9,
  GK_STATUS_NON_CONVERGENCE = 10,
  GK_STATUS_NUMERICAL_DIVERGENCE = 11,
  GK_STATUS_INTERNAL = 12,
} GkStatus;

typedef enum GkMethod {
  GK_METHOD_GKNOCK = 0,
  GK_METHOD_GROUP_LCD = 1,
} GkMethod;

typedef struct GkCovariance GkCovariance;

typedef struct GkKnockoffSpec GkKnockoffSpec;

typedef struct GkPartition GkPartition;

// Network training settings. Obtain defaults from [`gk_train_config_default`].
typedef struct GkTrainConfig {
  double learning_rate;
  double l1_strength;
  size_t epochs;
  size_t batch_size;
  size_t patience;
} GkTrainConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message of this thread into `buf` as a
// NUL-terminated string, truncating to `len - 1` bytes. Returns the full
// message length without the terminator.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t gk_last_error_message(char *buf, size_t len);

struct GkTrainConfig gk_train_config_default(void);

// Builds a partition of `p` features from one group label per feature.
// Groups are numbered by first appearance of their label.
//
// # Safety
// `labels` must point to `p` readable values; `out` must be writable.
enum GkStatus gk_partition_from_labels(const uint32_t *labels, size_t p, struct GkPartition **out);

// Number of groups, or 0 for a null handle.
//
// # Safety
// `part` must be null or a live partition handle.
size_t gk_partition_group_count(const struct GkPartition *part);

// # Safety
// `part` must be null or a handle not yet freed.
void gk_partition_free(struct GkPartition *part);

// Validates a symmetric positive definite `dim x dim` matrix.
//
// # Safety
// `values` must point to `dim * dim` readable doubles; `out` must be writable.
enum GkStatus gk_covariance_new(const double *values, size_t dim, struct GkCovariance **out);

// # Safety
// `cov` must be null or a handle not yet freed.
void gk_covariance_free(struct GkCovariance *cov);

// Group-block knockoff construction for a unit-diagonal covariance.
//
// # Safety
// `cov` and `part` must be live handles; `out` must be writable.
enum GkStatus gk_knockoff_spec_new(const struct GkCovariance *cov,
                                   const struct GkPartition *part,
                                   struct GkKnockoffSpec **out);

// Scale factor of the construction, written to `eta`.
//
// # Safety
// `spec` must be a live handle; `eta` must be writable.
enum GkStatus gk_knockoff_spec_eta(const struct GkKnockoffSpec *spec, double *eta);

// Writes the `p x p` block-diagonal matrix `S`.
//
// # Safety
// `spec` must be a live handle; `out` must hold `len` doubles.
enum GkStatus gk_knockoff_spec_s_matrix(const struct GkKnockoffSpec *spec, double *out, size_t len);

// # Safety
// `spec` must be null or a handle not yet freed.
void gk_knockoff_spec_free(struct GkKnockoffSpec *spec);

// Samples knockoffs for the `n x p` design `x` into `x_knock`.
//
// # Safety
// `spec` must be a live handle; `x` and `x_knock` must each hold `n * p`
// doubles.
enum GkStatus gk_sample_knockoffs(const struct GkKnockoffSpec *spec,
                                  const double *x,
                                  size_t n,
                                  size_t p,
                                  uint64_t seed,
                                  double *x_knock);

// Knockoff+ threshold of `m` statistics at level `q`. `tau` receives the
// threshold (infinity when nothing is selected) and `selected[j]` is set to
// 1 for selected groups and 0 otherwise.
//
// # Safety
// `w` and `selected` must hold `m` elements; `tau` must be writable.
enum GkStatus gk_knockoff_threshold(const double *w,
                                    size_t m,
                                    double q,
                                    double *tau,
                                    uint8_t *selected);

// Probability of at least `threshold` successes when drawing `draws` items
// without replacement from `successes + failures`.
//
// # Safety
// `prob` must be writable.
enum GkStatus gk_hypergeom_tail(uint64_t successes,
                                uint64_t failures,
                                uint64_t draws,
                                uint64_t threshold,
                                double *prob);

// Group statistics for an `n x p` design, its knockoffs and a response.
// `train` may be null for the defaults; it is ignored by `GroupLcd`, which
// picks its penalty from the data.
//
// # Safety
// `x` and `x_knock` must hold `n * p` doubles, `y` must hold `n`, `part`
// must be a live handle and `w_out` must hold one double per group.
enum GkStatus gk_group_statistic(const double *x,
                                 const double *x_knock,
                                 size_t n,
                                 size_t p,
                                 const double *y,
                                 const struct GkPartition *part,
                                 enum GkMethod method,
                                 const struct GkTrainConfig *train,
                                 uint64_t seed,
                                 double *w_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GKNOCK_H */
