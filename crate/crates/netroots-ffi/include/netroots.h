#ifndef NETROOTS_H
#define NETROOTS_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Model variants.
 */
typedef enum NrVariant {
  NR_VARIANT_SINGLE_ROOT = 0,
  NR_VARIANT_FIXED_K = 1,
  NR_VARIANT_RANDOM_K = 2,
  NR_VARIANT_SEQ = 3,
  NR_VARIANT_SEQ_STAR = 4,
} NrVariant;

/**
 * Status codes returned by every fallible function.
 */
typedef enum NrStatus {
  NR_STATUS_OK = 0,
  NR_STATUS_NULL_POINTER = 1,
  NR_STATUS_INVALID_ARGUMENT = 2,
  NR_STATUS_PARSE = 3,
  NR_STATUS_DISCONNECTED = 4,
  NR_STATUS_INTERNAL = 5,
  NR_STATUS_PANIC = 6,
} NrStatus;

/**
 * Opaque graph handle.
 */
typedef struct NrGraph NrGraph;

/**
 * Opaque inference result handle.
 */
typedef struct NrResult NrResult;

/**
 * Model parameters. Fields a variant does not use are ignored.
 * `alpha = INFINITY` selects uniform attachment.
 */
typedef struct NrParams {
  enum NrVariant variant;
  double alpha;
  double beta;
  size_t k;
  double alpha0;
  double theta;
  double alpha_tilde;
  double beta_tilde;
  double eta;
} NrParams;

/**
 * Sampler settings. Zero fields take the library default for the variant.
 */
typedef struct NrChainOptions {
  uint64_t seed;
  size_t burn_in;
  size_t max_sweeps;
  size_t num_chains;
  double convergence_tol;
} NrChainOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *nr_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *nr_version(void);

/**
 * Default parameters for a variant: linear preferential attachment,
 * `k = 2`, `alpha0 = 1`, `theta = 1.5`, `alpha_tilde = beta_tilde = 1`, `eta = 0`.
 */
struct NrParams nr_params_default(enum NrVariant variant);

struct NrChainOptions nr_chain_options_default(void);

/**
 * Builds a graph on nodes `0..n` from `m` edges given as `2m` endpoints.
 *
 * # Safety
 * `edges` must point to `2 * m` readable values (it may be null when `m == 0`);
 * `out` must be a valid pointer.
 */
enum NrStatus nr_graph_from_edges(size_t n, const uint32_t *edges, size_t m, struct NrGraph **out);

/**
 * Parses a whitespace-separated edge list (one `u v` pair per line, `#`
 * comments allowed). Node labels are arbitrary tokens.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be a valid pointer.
 */
enum NrStatus nr_graph_parse(const char *text, struct NrGraph **out);

/**
 * # Safety
 * `g` must be null or a handle returned by this library and not yet freed.
 */
void nr_graph_free(struct NrGraph *g);

/**
 * # Safety
 * `g` must be a live graph handle.
 */
size_t nr_graph_num_nodes(const struct NrGraph *g);

/**
 * # Safety
 * `g` must be a live graph handle.
 */
size_t nr_graph_num_edges(const struct NrGraph *g);

/**
 * Copies the label of node `u` into `buf` (NUL-terminated, truncated to
 * `cap`). Writes the full label length including the NUL to `len`.
 *
 * # Safety
 * `g` must be a live graph handle, `buf` must hold `cap` bytes, `len` must be valid.
 */
enum NrStatus nr_graph_label(const struct NrGraph *g, size_t u, char *buf, size_t cap, size_t *len);

/**
 * Runs the Gibbs sampler and stores the posterior root distribution.
 *
 * # Safety
 * `g` must be a live graph handle; `params` and `out` must be valid;
 * `opts` may be null for defaults.
 */
enum NrStatus nr_infer(const struct NrGraph *g,
                       const struct NrParams *params,
                       const struct NrChainOptions *opts,
                       struct NrResult **out);

/**
 * # Safety
 * `r` must be null or a handle returned by this library and not yet freed.
 */
void nr_result_free(struct NrResult *r);

/**
 * Number of nodes covered by the result.
 *
 * # Safety
 * `r` must be a live result handle.
 */
size_t nr_result_len(const struct NrResult *r);

/**
 * 1 if the chains met the convergence tolerance, 0 otherwise.
 *
 * # Safety
 * `r` must be a live result handle.
 */
int32_t nr_result_converged(const struct NrResult *r);

/**
 * Copies the per-node root probabilities into `probs` (`len` entries).
 *
 * # Safety
 * `r` must be a live result handle and `probs` must hold `len` doubles.
 */
enum NrStatus nr_result_root_probs(const struct NrResult *r, double *probs, size_t len);

/**
 * Credible set at level `1 - epsilon`. Writes up to `cap` node indices in
 * decreasing probability to `nodes` and the set size to `len`.
 *
 * # Safety
 * `r` must be a live result handle, `nodes` must hold `cap` entries, `len` must be valid.
 */
enum NrStatus nr_result_credible_set(const struct NrResult *r,
                                     double epsilon,
                                     uint64_t seed,
                                     size_t *nodes,
                                     size_t cap,
                                     size_t *len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NETROOTS_H */
