#ifndef RWNSGCN_H
#define RWNSGCN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes shared by every fallible function.
typedef enum RwStatus {
  RW_STATUS_OK = 0,
  RW_STATUS_NULL_POINTER = 1,
  RW_STATUS_INVALID_ARGUMENT = 2,
  RW_STATUS_DIMENSION_MISMATCH = 3,
  RW_STATUS_NOT_CONVERGED = 4,
  RW_STATUS_IO = 5,
  RW_STATUS_PARSE = 6,
  RW_STATUS_BUFFER_TOO_SMALL = 7,
  RW_STATUS_INTERNAL = 99,
} RwStatus;

// Opaque dataset handle.
typedef struct RwDataset RwDataset;

// Opaque graph handle.
typedef struct RwGraph RwGraph;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or NULL. The pointer
// stays valid until the next call into this library on the same thread.
const char *rw_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *rw_version(void);

// Builds an undirected graph from `m` edges `(us[i], vs[i])`. `ws` may be
// NULL for unit weights.
//
// # Safety
// `us` and `vs` (and `ws` unless NULL) must point to `m` readable values;
// `out` must be writable.
enum RwStatus rw_graph_new(size_t num_nodes,
                           const size_t *us,
                           const size_t *vs,
                           const double *ws,
                           size_t m,
                           struct RwGraph **out);

// Releases a graph; NULL is ignored.
//
// # Safety
// `g` must come from this library and not be freed twice.
void rw_graph_free(struct RwGraph *g);

// # Safety
// `g` must be a live handle; the out pointers must be writable.
enum RwStatus rw_graph_size(const struct RwGraph *g, size_t *num_nodes, size_t *num_edges);

// Copies the edge list (`u < v`, lexicographic) into caller buffers of
// capacity `cap`. `out_len` receives the edge count even when the buffers
// are too small.
//
// # Safety
// Buffers must hold `cap` writable values; `out_len` must be writable.
enum RwStatus rw_graph_edges(const struct RwGraph *g,
                             size_t *us,
                             size_t *vs,
                             double *ws,
                             size_t cap,
                             size_t *out_len);

// Random walk with restart from `source`; writes `num_nodes` scores.
//
// # Safety
// `out` must hold `len` writable doubles.
enum RwStatus rw_rwr_scores(const struct RwGraph *g,
                            size_t source,
                            double alpha,
                            double *out,
                            size_t len);

// Converged PageRank; writes `num_nodes` scores.
//
// # Safety
// `out` must hold `len` writable doubles.
enum RwStatus rw_pagerank_scores(const struct RwGraph *g, double alpha, double *out, size_t len);

// Negative-sample candidates for `source`: the `k_per_level` best
// combined scorers in each hop layer `2..l_max`. Writes up to `cap` node
// ids; `out_len` receives the candidate count.
//
// # Safety
// `out` must hold `cap` writable values; `out_len` must be writable.
enum RwStatus rw_select_candidates(const struct RwGraph *g,
                                   size_t source,
                                   double alpha,
                                   double beta,
                                   size_t l_max,
                                   size_t k_per_level,
                                   size_t *out,
                                   size_t cap,
                                   size_t *out_len);

// Removes the `⌈fraction·|E|⌉` highest-betweenness edges into a new graph.
//
// # Safety
// `g` must be live; `out` must be writable.
enum RwStatus rw_ctbca_remove(const struct RwGraph *g,
                              double fraction,
                              uint64_t seed,
                              struct RwGraph **out);

// Adds clamped Gaussian noise of scale `sigma` to every edge weight.
//
// # Safety
// `g` must be live; `out` must be writable.
enum RwStatus rw_twpa_perturb(const struct RwGraph *g,
                              double sigma,
                              uint64_t seed,
                              struct RwGraph **out);

// Fraction of `mask` entries whose prediction equals the label.
//
// # Safety
// `preds`/`labels` must hold `n` values, `mask` `mask_len`; `out` writable.
enum RwStatus rw_accuracy(const size_t *preds,
                          const size_t *labels,
                          size_t n,
                          const size_t *mask,
                          size_t mask_len,
                          double *out);

// Mean average cosine distance (×100) of a row-major `rows × cols` matrix.
//
// # Safety
// `data` must hold `rows * cols` doubles; `out` must be writable.
enum RwStatus rw_mad(const double *data, size_t rows, size_t cols, double *out);

// Loads a JSON dataset bundle.
//
// # Safety
// `path` must be a NUL-terminated UTF-8 string; `out` must be writable.
enum RwStatus rw_dataset_load_json(const char *path, struct RwDataset **out);

// # Safety
// `ds` must come from this library and not be freed twice.
void rw_dataset_free(struct RwDataset *ds);

// # Safety
// `ds` must be live; out pointers must be writable.
enum RwStatus rw_dataset_shape(const struct RwDataset *ds,
                               size_t *num_nodes,
                               size_t *num_features,
                               size_t *num_classes);

// Copies the dataset's graph into a new, independently owned handle.
//
// # Safety
// `ds` must be live; `out` must be writable.
enum RwStatus rw_dataset_graph(const struct RwDataset *ds, struct RwGraph **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RWNSGCN_H */
