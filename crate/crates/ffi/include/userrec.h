/* SPDX-License-Identifier: Apache-2.0 */

#ifndef USERREC_H
#define USERREC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum UrStatus {
  UR_STATUS_OK = 0,
  UR_STATUS_NULL_POINTER = 1,
  UR_STATUS_INVALID_ARGUMENT = 2,
  // A fairness or parameter bound was violated.
  UR_STATUS_CONSTRAINT = 3,
  // Bad input data or a provider failure.
  UR_STATUS_DATA = 4,
  UR_STATUS_BUFFER_TOO_SMALL = 5,
  UR_STATUS_PANIC = 6,
} UrStatus;

typedef enum UrMethod {
  UR_METHOD_PROVIDER = 0,
  UR_METHOD_PRIVATE_RANK = 1,
  UR_METHOD_PRIVATE_WALK = 2,
  UR_METHOD_CONSUL = 3,
  UR_METHOD_RANDOM_FAIR = 4,
  UR_METHOD_ORACLE_FAIR = 5,
} UrMethod;

// Opaque attribute table handle.
typedef struct UrAttributes UrAttributes;

// Opaque provider handle.
typedef struct UrProvider UrProvider;

// Knobs for [`ur_recommend`]; start from [`ur_params_default`].
typedef struct UrParams {
  // Minimum items per group.
  uint32_t tau;
  // PrivateRank damping factor.
  double c;
  // PrivateRank power iterations.
  uint32_t iterations;
  // PrivateWalk walk length.
  uint32_t privatewalk_steps;
  // Consul page budget.
  uint32_t consul_steps;
  uint64_t seed;
} UrParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *ur_version(void);

// Message of the last failed call on this thread, or NULL. The pointer is
// valid until the next call into this library on the same thread.
const char *ur_last_error_message(void);

// Euclidean k-NN provider over `n * dim` row-major features.
//
// # Safety
// `features` must point to `n * dim` doubles; `out` must be valid for writes.
enum UrStatus ur_provider_knn(const double *features,
                              size_t n,
                              size_t dim,
                              size_t k,
                              struct UrProvider **out);

// Inner-product provider over `n * dim` row-major embeddings.
//
// # Safety
// `embeddings` must point to `n * dim` doubles; `out` must be valid for writes.
enum UrStatus ur_provider_dot(const double *embeddings,
                              size_t n,
                              size_t dim,
                              size_t k,
                              struct UrProvider **out);

// Provider from explicit lists: row `i` of the `n * k` array `lists` is the
// page of item `i`, padded with `UINT32_MAX` when shorter than `k`.
//
// # Safety
// `lists` must point to `n * k` values; `out` must be valid for writes.
enum UrStatus ur_provider_table(const uint32_t *lists, size_t n, size_t k, struct UrProvider **out);

// # Safety
// `provider` must come from a `ur_provider_*` constructor and not be used
// afterwards. NULL is ignored.
void ur_provider_free(struct UrProvider *provider);

// # Safety
// `provider` must be a live handle.
size_t ur_provider_n_items(const struct UrProvider *provider);

// # Safety
// `provider` must be a live handle.
size_t ur_provider_k(const struct UrProvider *provider);

// The provider's own list for `source`.
//
// # Safety
// `provider` must be a live handle, `out` must hold `cap` values and
// `out_len` must be valid for writes.
enum UrStatus ur_provider_query(const struct UrProvider *provider,
                                uint32_t source,
                                uint32_t *out,
                                size_t cap,
                                size_t *out_len);

// Attribute table from one group index per item, each below `n_groups`.
//
// # Safety
// `groups` must point to `n` values; `out` must be valid for writes.
enum UrStatus ur_attributes_new(const uint16_t *groups,
                                size_t n,
                                size_t n_groups,
                                struct UrAttributes **out);

// # Safety
// `attrs` must come from [`ur_attributes_new`] and not be used afterwards.
// NULL is ignored.
void ur_attributes_free(struct UrAttributes *attrs);

// Defaults: `tau = 0`, `c = 0.01`, 10 iterations, PrivateWalk length 100,
// Consul budget 10, seed 0.
struct UrParams ur_params_default(void);

// Fair list for `source` written to `out`.
//
// `out_accesses` (optional) receives the number of distinct provider pages
// the method needed; for PrivateRank that is the whole crawl, and for
// oracle_fair it is 0 since it reads scores directly. PrivateRank crawls
// once per handle and damping setting and reuses the network.
//
// # Safety
// Handles must be live; `history` must hold `history_len` values; `out`
// must hold `cap` values; `out_len` must be valid for writes.
enum UrStatus ur_recommend(const struct UrProvider *provider,
                           const struct UrAttributes *attrs,
                           enum UrMethod method,
                           uint32_t source,
                           const struct UrParams *params,
                           const uint32_t *history,
                           size_t history_len,
                           uint32_t *out,
                           size_t cap,
                           size_t *out_len,
                           uint64_t *out_accesses);

// Smallest group share in the list.
//
// # Safety
// `attrs` must be live; `items` must hold `len` values; `out` must be valid
// for writes.
enum UrStatus ur_least_ratio(const struct UrAttributes *attrs,
                             const uint32_t *items,
                             size_t len,
                             double *out);

// Base-2 entropy of the group shares in the list.
//
// # Safety
// Same contract as [`ur_least_ratio`].
enum UrStatus ur_entropy(const struct UrAttributes *attrs,
                         const uint32_t *items,
                         size_t len,
                         double *out);

// Recovers `dim`-dimensional coordinates from the provider's k-NN graph
// (crawl, symmetrized hop distances, classical MDS), written row-major to
// `out`, which must hold `n * dim` doubles.
//
// # Safety
// `provider` must be live; `out` must hold `cap` doubles.
enum UrStatus ur_recover(const struct UrProvider *provider, size_t dim, double *out, size_t cap);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* USERREC_H */
