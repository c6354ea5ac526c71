#ifndef QUADLS_H
#define QUADLS_H

/* Generated by cbindgen from the quadls-ffi crate. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QlsStatus {
  QLS_STATUS_OK = 0,
  QLS_STATUS_NULL_POINTER = 1,
  QLS_STATUS_INVALID_ARGUMENT = 2,
  QLS_STATUS_SINGULAR = 3,
  QLS_STATUS_NON_FINITE = 4,
  QLS_STATUS_IO = 5,
  QLS_STATUS_PARSE = 6,
  QLS_STATUS_CONFIG = 7,
  QLS_STATUS_PANIC = 8,
} QlsStatus;

typedef enum QlsOutcome {
  QLS_OUTCOME_RESAMPLE = 0,
  QLS_OUTCOME_IMMEDIATE_ACCEPT = 1,
  QLS_OUTCOME_INTERPOLATION = 2,
  QLS_OUTCOME_BOUNDED_EXTRAPOLATION = 3,
  QLS_OUTCOME_CLAMPED_MIN = 4,
  QLS_OUTCOME_CLAMPED_MAX = 5,
} QlsOutcome;

typedef enum QlsKind {
  QLS_KIND_FFF = 0,
  QLS_KIND_FGF = 1,
  QLS_KIND_FFG = 2,
  QLS_KIND_FGFG = 3,
  QLS_KIND_GG = 4,
} QlsKind;

typedef enum QlsExtrapolation {
  QLS_EXTRAPOLATION_REJECT = 0,
  QLS_EXTRAPOLATION_ACCEPT = 1,
} QlsExtrapolation;

typedef struct QlsDataset QlsDataset;

typedef struct QlsRun QlsRun;

typedef struct QlsBounds {
  double alpha_min;
  double alpha_max;
  bool enforced;
} QlsBounds;

/**
 * Result of one step-size fit. Coefficients are NaN when the fit failed;
 * `k3` is NaN for the derivative-only model.
 */
typedef struct QlsDecision {
  double alpha_star;
  enum QlsOutcome outcome;
  double k1;
  double k2;
  double k3;
  bool has_vertex;
  double vertex;
} QlsDecision;

typedef double (*QlsObjectiveFn)(double alpha, void *user);

typedef struct QlsTrainOptions {
  enum QlsKind kind;
  enum QlsExtrapolation flag;
  /**
   * Batches at least as large as the training split use the full split.
   */
  size_t batch_size;
  uint64_t budget;
  uint64_t seed;
  /**
   * 0 trains a logistic model, otherwise one sigmoid hidden layer.
   */
  size_t hidden;
  struct QlsBounds bounds;
} QlsTrainOptions;

/**
 * Missing errors are NaN.
 */
typedef struct QlsRecord {
  uint64_t fe;
  uint64_t iter;
  double alpha;
  double train_error;
  double test_error;
  double dtheta;
  enum QlsOutcome outcome;
} QlsRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *qls_last_error(void);

/**
 * Library version as a static string.
 */
const char *qls_version(void);

struct QlsBounds qls_bounds_standard(void);

struct QlsBounds qls_bounds_wdbc(void);

/**
 * # Safety
 * `bounds` and `out` must be valid pointers.
 */
enum QlsStatus qls_step_size_fff(double alpha1,
                                 double alpha2,
                                 double f0,
                                 double f1,
                                 double f2,
                                 const struct QlsBounds *bounds,
                                 struct QlsDecision *out);

/**
 * # Safety
 * `bounds` and `out` must be valid pointers.
 */
enum QlsStatus qls_step_size_fgf(double alpha1,
                                 double f0,
                                 double f1,
                                 double fp0,
                                 const struct QlsBounds *bounds,
                                 struct QlsDecision *out);

/**
 * # Safety
 * `bounds` and `out` must be valid pointers.
 */
enum QlsStatus qls_step_size_ffg(double alpha1,
                                 double f0,
                                 double f1,
                                 double fp1,
                                 const struct QlsBounds *bounds,
                                 struct QlsDecision *out);

/**
 * # Safety
 * `bounds` and `out` must be valid pointers.
 */
enum QlsStatus qls_step_size_fgfg(double alpha1,
                                  double f0,
                                  double f1,
                                  double fp0,
                                  double fp1,
                                  const struct QlsBounds *bounds,
                                  struct QlsDecision *out);

/**
 * # Safety
 * `bounds` and `out` must be valid pointers.
 */
enum QlsStatus qls_step_size_gg(double alpha1,
                                double fp0,
                                double fp1,
                                const struct QlsBounds *bounds,
                                struct QlsDecision *out);

/**
 * Inverse norm of `d`, clamped to the bounds.
 *
 * # Safety
 * `d` must point to `n` doubles; `bounds` and `out` must be valid.
 */
enum QlsStatus qls_initial_guess(const double *d,
                                 size_t n,
                                 const struct QlsBounds *bounds,
                                 double *out);

/**
 * Minimizes `f` over `[a, b]` to absolute tolerance `tol`.
 *
 * # Safety
 * `f` must be callable with `user`; `out` must be valid.
 */
enum QlsStatus qls_golden_section(QlsObjectiveFn f,
                                  void *user,
                                  double a,
                                  double b,
                                  double tol,
                                  double *out);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` valid.
 */
enum QlsStatus qls_dataset_load_wdbc(const char *path,
                                     uint64_t split_seed,
                                     struct QlsDataset **out);

/**
 * The test pair may be null.
 *
 * # Safety
 * Non-null paths must be NUL-terminated strings; `out` must be valid.
 */
enum QlsStatus qls_dataset_load_mnist(const char *train_images,
                                      const char *train_labels,
                                      const char *test_images,
                                      const char *test_labels,
                                      struct QlsDataset **out);

/**
 * One training batch file; the test batch may be null.
 *
 * # Safety
 * Non-null paths must be NUL-terminated strings; `out` must be valid.
 */
enum QlsStatus qls_dataset_load_cifar10(const char *train_batch,
                                        const char *test_batch,
                                        struct QlsDataset **out);

/**
 * # Safety
 * `ds` must come from a `qls_dataset_load_*` call, or be null.
 */
void qls_dataset_free(struct QlsDataset *ds);

/**
 * Training samples, or 0 for a null handle.
 *
 * # Safety
 * `ds` must be a live handle or null.
 */
size_t qls_dataset_n_train(const struct QlsDataset *ds);

/**
 * # Safety
 * `ds` must be a live handle or null.
 */
size_t qls_dataset_n_test(const struct QlsDataset *ds);

/**
 * # Safety
 * `ds` must be a live handle or null.
 */
size_t qls_dataset_n_features(const struct QlsDataset *ds);

/**
 * g-g, extrapolation rejected, batch 10, 10⁴ evaluations, seed 0,
 * logistic model, WDBC bounds.
 */
struct QlsTrainOptions qls_train_options_default(void);

/**
 * Trains from a seeded initialization until the budget is spent.
 *
 * # Safety
 * `ds` must be a live handle; `options` and `out` must be valid.
 */
enum QlsStatus qls_train(const struct QlsDataset *ds,
                         const struct QlsTrainOptions *options,
                         struct QlsRun **out);

/**
 * # Safety
 * `run` must come from [`qls_train`], or be null.
 */
void qls_run_free(struct QlsRun *run);

/**
 * Iterations recorded, or 0 for a null handle.
 *
 * # Safety
 * `run` must be a live handle or null.
 */
size_t qls_run_len(const struct QlsRun *run);

/**
 * # Safety
 * `run` must be a live handle and `out` valid.
 */
enum QlsStatus qls_run_record(const struct QlsRun *run, size_t index, struct QlsRecord *out);

/**
 * Last measured train and test classification error.
 *
 * # Safety
 * `run` must be a live handle; `train_error` and `test_error` valid.
 */
enum QlsStatus qls_run_final_errors(const struct QlsRun *run,
                                    double *train_error,
                                    double *test_error);

/**
 * Total evaluations spent, or 0 for a null handle.
 *
 * # Safety
 * `run` must be a live handle or null.
 */
uint64_t qls_run_total_fe(const struct QlsRun *run);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QUADLS_H */
