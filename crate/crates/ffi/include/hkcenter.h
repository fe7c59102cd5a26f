/* Generated by cbindgen. Do not edit. */

#ifndef HKCENTER_H
#define HKCENTER_H

#pragma once

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HkStatus {
  HK_STATUS_OK = 0,
  HK_STATUS_NULL_POINTER = 1,
  HK_STATUS_INVALID_ARGUMENT = 2,
  HK_STATUS_INVALID_CONFIG = 3,
  HK_STATUS_DIMENSION_MISMATCH = 4,
  HK_STATUS_OUT_OF_BOX = 5,
  HK_STATUS_NOT_FOUND = 6,
  HK_STATUS_EMPTY = 7,
  HK_STATUS_DEGENERATE = 8,
  HK_STATUS_INTERNAL = 9,
  HK_STATUS_PANIC = 10,
} HkStatus;

typedef enum HkMode {
  HK_MODE_LOW = 0,
  HK_MODE_HIGH = 1,
} HkMode;

// Opaque handle to one dynamic structure.
typedef struct HkCenter HkCenter;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Creates a structure over `{1..delta}^d`. `ell` and `seed` only affect
// the high-dimensional mode.
//
// # Safety
// `out` must be valid for writes.
enum HkStatus hk_new(size_t d,
                     int64_t delta,
                     enum HkMode mode,
                     size_t ell,
                     uint64_t seed,
                     struct HkCenter **out);

// Releases a handle. Null is ignored.
//
// # Safety
// `h` must come from `hk_new` and not be used afterwards.
void hk_free(struct HkCenter *h);

// Inserts a point of `len` coordinates. Writes the id of this copy.
//
// # Safety
// `coords` must point to `len` readable values; `out_id` may be null.
enum HkStatus hk_insert(struct HkCenter *h, const int64_t *coords, size_t len, uint64_t *out_id);

// Removes one copy of a point.
//
// # Safety
// `coords` must point to `len` readable values.
enum HkStatus hk_delete(struct HkCenter *h, const int64_t *coords, size_t len);

// Representative of a stored point in the `k`-clustering. Writes its id
// and its `len` coordinates to `out_coords`.
//
// # Safety
// `coords` must point to `len` readable values and `out_coords` to `len`
// writable ones.
enum HkStatus hk_cluster(const struct HkCenter *h,
                         const int64_t *coords,
                         size_t len,
                         size_t k,
                         uint64_t *out_id,
                         int64_t *out_coords);

// Number of distinct coordinates and of stored copies.
//
// # Safety
// Out-pointers must be valid for writes.
enum HkStatus hk_len(const struct HkCenter *h, size_t *out_distinct, uint64_t *out_total);

// Index `M` of the top level; levels are `0..=M`.
//
// # Safety
// `out` must be valid for writes.
enum HkStatus hk_max_level(const struct HkCenter *h, size_t *out);

// Number of members of one level.
//
// # Safety
// `out` must be valid for writes.
enum HkStatus hk_level_size(const struct HkCenter *h, size_t level, size_t *out);

// Counts violated family conditions at the structure's own parent factor.
// Quadratic in the number of points.
//
// # Safety
// `out_violations` must be valid for writes.
enum HkStatus hk_validate(const struct HkCenter *h, size_t *out_violations);

// Dendrogram export as a NUL-terminated string owned by the caller.
//
// # Safety
// `out` must be valid for writes; release the string with
// `hk_string_free`.
enum HkStatus hk_export_dendrogram(const struct HkCenter *h, char **out);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not be used afterwards.
void hk_string_free(char *s);

// Static description of a status code.
const char *hk_status_string(enum HkStatus status);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HKCENTER_H */
