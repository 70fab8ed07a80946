/* Generated by cbindgen from crates/ffi; do not edit. */

#ifndef PAYNET_H
#define PAYNET_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum PaynetStatus {
  PAYNET_STATUS_OK = 0,
  PAYNET_STATUS_NULL_POINTER = 1,
  PAYNET_STATUS_INVALID_UTF8 = 2,
  PAYNET_STATUS_INVALID_INPUT = 3,
  PAYNET_STATUS_IO = 4,
  PAYNET_STATUS_PARSE = 5,
  /**
   * The quantity is not defined for this input.
   */
  PAYNET_STATUS_UNDEFINED = 6,
  /**
   * A caller-provided buffer has the wrong length.
   */
  PAYNET_STATUS_BAD_LENGTH = 7,
  PAYNET_STATUS_PANIC = 8,
} PaynetStatus;

/**
 * Opaque graph handle.
 */
typedef struct PaynetGraph PaynetGraph;

/**
 * Opaque handle to a model trained by `paynet classify train`.
 */
typedef struct PaynetModel PaynetModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *paynet_version(void);

/**
 * Message of the last failed call on this thread; empty if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *paynet_last_error(void);

/**
 * Loads a graph from an edge list (`src,dst,weight`) and node file
 * (`id,status,rating,sector`).
 *
 * # Safety
 * Paths must be NUL-terminated strings; `out` must be writable.
 */
enum PaynetStatus paynet_graph_load(const char *edges_path,
                                    const char *nodes_path,
                                    struct PaynetGraph **out);

/**
 * Builds a graph on nodes `0..n_nodes` (ids are their decimal indices).
 * Parallel edges are merged by summing weights. `ratings` may be null;
 * otherwise it holds `n_nodes` codes 0 = L, 1 = M, 2 = H, anything else NA.
 *
 * # Safety
 * `src`, `dst` and `weight` must point to `n_edges` elements each.
 */
enum PaynetStatus paynet_graph_from_edges(size_t n_nodes,
                                          const size_t *src,
                                          const size_t *dst,
                                          const double *weight,
                                          size_t n_edges,
                                          const int32_t *ratings,
                                          struct PaynetGraph **out);

/**
 * Releases a graph. Null is ignored.
 *
 * # Safety
 * `g` must come from this library and not be used afterwards.
 */
void paynet_graph_free(struct PaynetGraph *g);

/**
 * Node count, 0 for a null handle.
 *
 * # Safety
 * `g` must be null or a live handle.
 */
size_t paynet_graph_node_count(const struct PaynetGraph *g);

/**
 * Edge count, 0 for a null handle.
 *
 * # Safety
 * `g` must be null or a live handle.
 */
size_t paynet_graph_edge_count(const struct PaynetGraph *g);

/**
 * Directed density `m / (n (n - 1))`.
 *
 * # Safety
 * `out` must be writable.
 */
enum PaynetStatus paynet_density(size_t n, size_t m, double *out);

/**
 * Modularity of a node-to-group assignment (`len` must equal the node count).
 *
 * # Safety
 * `assignment` must point to `len` elements; `out` must be writable.
 */
enum PaynetStatus paynet_modularity(const struct PaynetGraph *g,
                                    const size_t *assignment,
                                    size_t len,
                                    double *out);

/**
 * Louvain modules numbered from 1 by decreasing size, and their modularity.
 *
 * # Safety
 * `assignment` must have room for `len` elements, `len` equal to the node
 * count; `q` must be writable.
 */
enum PaynetStatus paynet_louvain(const struct PaynetGraph *g,
                                 uint64_t seed,
                                 size_t *assignment,
                                 size_t len,
                                 double *q);

/**
 * Agony-minimizing ranks (1 = lowest), the agony and the hierarchy `h`.
 * `exact` selects the exhaustive solver, which accepts at most 16 nodes.
 *
 * # Safety
 * `ranks` must have room for `len` elements, `len` equal to the node count;
 * `agony` and `h` must be writable.
 */
enum PaynetStatus paynet_agony(const struct PaynetGraph *g,
                               bool exact,
                               size_t *ranks,
                               size_t len,
                               uint64_t *agony,
                               double *h);

/**
 * Rating assortativity over L, M, H and NA, by edge count or by volume.
 *
 * # Safety
 * `r` must be writable.
 */
enum PaynetStatus paynet_rating_assortativity(const struct PaynetGraph *g,
                                              bool weighted,
                                              double *r);

/**
 * Power-law tail fit by maximum likelihood with KS-selected `xmin`.
 *
 * # Safety
 * `samples` must point to `len` values; `alpha` and `xmin` must be writable.
 */
enum PaynetStatus paynet_powerlaw_fit(const double *samples,
                                      size_t len,
                                      bool discrete,
                                      double *alpha,
                                      double *xmin);

/**
 * Hypergeometric tail `P(X ≥ k)` (`upper`) or `P(X ≤ k)` for `n` draws from
 * a population of `big_n` holding `big_k` successes.
 *
 * # Safety
 * `out` must be writable.
 */
enum PaynetStatus paynet_hypergeom_tail(uint64_t k,
                                        uint64_t n,
                                        uint64_t big_k,
                                        uint64_t big_n,
                                        bool upper,
                                        double *out);

/**
 * Loads a `model.json` written by `paynet classify train`.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum PaynetStatus paynet_model_load(const char *path, struct PaynetModel **out);

/**
 * Releases a model. Null is ignored.
 *
 * # Safety
 * `m` must come from this library and not be used afterwards.
 */
void paynet_model_free(struct PaynetModel *m);

/**
 * Number of predictors a model expects, 0 for a null handle.
 *
 * # Safety
 * `m` must be null or a live handle.
 */
size_t paynet_model_feature_count(const struct PaynetModel *m);

/**
 * Predicts a rating (0 = L, 1 = M, 2 = H) from one preprocessed feature row.
 *
 * # Safety
 * `features` must point to `len` values; `class` must be writable.
 */
enum PaynetStatus paynet_model_predict(const struct PaynetModel *m,
                                       const double *features,
                                       size_t len,
                                       int32_t *class_);

/**
 * Runs the command-line pipeline with `argv` (program name first) and
 * returns its exit status: 0 success, 2 config, 3 dependency, 4 data error.
 *
 * # Safety
 * `argv` must point to `argc` NUL-terminated strings.
 */
int32_t paynet_run(size_t argc, const char *const *argv);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PAYNET_H */
