#ifndef NSBM_H
#define NSBM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes.
typedef enum NsbmStatus {
  NSBM_STATUS_OK = 0,
  NSBM_STATUS_NULL_POINTER = 1,
  NSBM_STATUS_INVALID_INPUT = 2,
  NSBM_STATUS_DIMENSION_MISMATCH = 3,
  NSBM_STATUS_NON_FINITE = 4,
  NSBM_STATUS_NUMERICAL = 5,
  NSBM_STATUS_DEGENERATE = 6,
  NSBM_STATUS_IO = 7,
  NSBM_STATUS_PANIC = 8,
} NsbmStatus;

typedef enum NsbmScenario {
  NSBM_SCENARIO_A = 0,
  NSBM_SCENARIO_B = 1,
} NsbmScenario;

// Row-major `n x p` covariate matrix.
typedef struct NsbmCovariates NsbmCovariates;

// Output of a refinement (MPL or VEM).
typedef struct NsbmFit NsbmFit;

// Undirected simple graph.
typedef struct NsbmGraph NsbmGraph;

// Hard community labels in `0..k`.
typedef struct NsbmLabels NsbmLabels;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. The pointer is
// valid until the next call into the library from the same thread.
const char *nsbm_last_error(void);

// Builds a graph on `n` nodes from `m` edges given as `2m` node ids.
//
// # Safety
// `edges` must point to `2 * m` readable values; `out` must be writable.
enum NsbmStatus nsbm_graph_from_edges(size_t n,
                                      const uint32_t *edges,
                                      size_t m,
                                      struct NsbmGraph **out);

// # Safety
// `g` must be null or a handle from this library not yet freed.
void nsbm_graph_free(struct NsbmGraph *g);

// # Safety
// `g` must be a live handle.
size_t nsbm_graph_node_count(const struct NsbmGraph *g);

// # Safety
// `g` must be a live handle.
size_t nsbm_graph_edge_count(const struct NsbmGraph *g);

// # Safety
// `values` must point to `n * p` readable doubles; `out` must be writable.
enum NsbmStatus nsbm_covariates_new(size_t n,
                                    size_t p,
                                    const double *values,
                                    struct NsbmCovariates **out);

// # Safety
// `x` must be null or a handle from this library not yet freed.
void nsbm_covariates_free(struct NsbmCovariates *x);

// # Safety
// `x` must be a live handle.
size_t nsbm_covariates_dim(const struct NsbmCovariates *x);

// # Safety
// `values` must point to `n` readable labels; `out` must be writable.
enum NsbmStatus nsbm_labels_new(size_t n,
                                const uint32_t *values,
                                size_t k,
                                struct NsbmLabels **out);

// # Safety
// `c` must be null or a handle from this library not yet freed.
void nsbm_labels_free(struct NsbmLabels *c);

// # Safety
// `c` must be a live handle.
size_t nsbm_labels_len(const struct NsbmLabels *c);

// # Safety
// `c` must be a live handle.
size_t nsbm_labels_k(const struct NsbmLabels *c);

// Copies the labels into `buf`, which must hold `len` values with
// `len == nsbm_labels_len(c)`.
//
// # Safety
// `buf` must point to `len` writable values.
enum NsbmStatus nsbm_labels_copy(const struct NsbmLabels *c, uint32_t *buf, size_t len);

// Draws a network, covariates and planted labels from a simulation
// scenario.
//
// # Safety
// The three output pointers must be writable.
enum NsbmStatus nsbm_simulate(enum NsbmScenario scenario,
                              size_t n,
                              uint64_t seed,
                              struct NsbmGraph **graph,
                              struct NsbmCovariates **covariates,
                              struct NsbmLabels **labels);

// SDP relaxation followed by k-means rounding. `iterations == 0` uses the
// default.
//
// # Safety
// Handles must be live; `out` must be writable.
enum NsbmStatus nsbm_sdp_init(const struct NsbmGraph *g,
                              const struct NsbmCovariates *x,
                              size_t k,
                              double gamma,
                              double lambda,
                              size_t iterations,
                              uint64_t seed,
                              struct NsbmLabels **out);

// Maximum profile likelihood from `init`.
//
// # Safety
// Handles must be live; `out` must be writable.
enum NsbmStatus nsbm_mpl_fit(const struct NsbmGraph *g,
                             const struct NsbmCovariates *x,
                             const struct NsbmLabels *init,
                             struct NsbmFit **out);

// Variational EM started from `init` softened toward uniform.
//
// # Safety
// Handles must be live; `out` must be writable.
enum NsbmStatus nsbm_vem_fit(const struct NsbmGraph *g,
                             const struct NsbmCovariates *x,
                             const struct NsbmLabels *init,
                             struct NsbmFit **out);

// # Safety
// `f` must be null or a handle from this library not yet freed.
void nsbm_fit_free(struct NsbmFit *f);

// Final objective (profile log-likelihood or ELBO).
//
// # Safety
// `f` must be a live handle.
double nsbm_fit_objective(const struct NsbmFit *f);

// # Safety
// `f` must be a live handle.
bool nsbm_fit_converged(const struct NsbmFit *f);

// # Safety
// `f` must be a live handle; `buf` must point to `len` writable values.
enum NsbmStatus nsbm_fit_labels(const struct NsbmFit *f, uint32_t *buf, size_t len);

// Copies the row-major `k x p` coefficients (last row zero) into `buf`.
//
// # Safety
// `f` must be a live handle; `buf` must point to `len` writable doubles.
enum NsbmStatus nsbm_fit_beta(const struct NsbmFit *f, double *buf, size_t len);

// # Safety
// Handles must be live; `out` must be writable.
enum NsbmStatus nsbm_nmi(const struct NsbmLabels *a, const struct NsbmLabels *b, double *out);

// # Safety
// Handles must be live; `out` must be writable.
enum NsbmStatus nsbm_ari(const struct NsbmLabels *a, const struct NsbmLabels *b, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NSBM_H */
