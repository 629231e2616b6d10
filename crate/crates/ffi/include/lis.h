#ifndef LIS_H
#define LIS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LisStatus {
  LIS_STATUS_OK = 0,
  LIS_STATUS_ERR_NULL_POINTER = -1,
  LIS_STATUS_ERR_INVALID_ARGUMENT = -2,
  LIS_STATUS_ERR_CONFIG = -3,
  LIS_STATUS_ERR_TOPOLOGY = -4,
  LIS_STATUS_ERR_DISCONNECTED = -5,
  LIS_STATUS_ERR_BEAMFORMING = -6,
  LIS_STATUS_ERR_SIMULATION = -7,
  LIS_STATUS_ERR_IO = -8,
  LIS_STATUS_ERR_BUFFER_TOO_SMALL = -9,
  LIS_STATUS_ERR_PANIC = -99,
} LisStatus;

typedef enum LisScheme {
  LIS_SCHEME_CENTRALIZED_PARALLEL = 0,
  LIS_SCHEME_CENTRALIZED_CHAINED = 1,
  LIS_SCHEME_DISTRIBUTED = 2,
} LisScheme;

typedef enum LisTopologyKind {
  LIS_TOPOLOGY_KIND_PARALLEL = 0,
  LIS_TOPOLOGY_KIND_CHAIN = 1,
  LIS_TOPOLOGY_KIND_MESH = 2,
} LisTopologyKind;

typedef enum LisMode {
  LIS_MODE_CENTRALIZED = 0,
  LIS_MODE_DISTRIBUTED = 1,
} LisMode;

typedef enum LisDirection {
  LIS_DIRECTION_UPLINK = 0,
  LIS_DIRECTION_DOWNLINK = 1,
} LisDirection;

typedef enum LisWeights {
  LIS_WEIGHTS_ZF = 0,
  LIS_WEIGHTS_MRC = 1,
} LisWeights;

/**
 * Opaque surface configuration.
 */
typedef struct LisConfig LisConfig;

/**
 * Opaque routed topology.
 */
typedef struct LisTopology LisTopology;

/**
 * A rate in bits per second. `numer / denom` is exact when both fit in 64
 * bits; otherwise both are zero and only `bps` is meaningful.
 */
typedef struct LisRate {
  double bps;
  uint64_t numer;
  uint64_t denom;
} LisRate;

typedef struct LisReport {
  struct LisRate r_element;
  struct LisRate r_module;
  struct LisRate r_max_central;
  struct LisRate r_aggregate;
  double power_w;
} LisReport;

typedef struct LisSimOptions {
  enum LisMode mode;
  enum LisDirection direction;
  uint64_t duration_symbols;
  /**
   * When true, `fail_link` fails for symbols sampled at or after
   * `fail_at_step`.
   */
  bool inject_failure;
  size_t fail_link;
  uint64_t fail_at_step;
} LisSimOptions;

typedef struct LisSimSummary {
  struct LisRate simulated;
  struct LisRate analytic;
  struct LisRate peak_link;
  uint64_t delivered_symbols;
  uint64_t alignment_violations;
  /**
   * Simulated and analytic aggregates agree exactly, every symbol was
   * delivered and no alignment violation occurred.
   */
  bool agrees;
} LisSimSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Static, NUL-terminated library version.
 */
const char *lis_version(void);

/**
 * Message for the last failed call on this thread, or an empty string.
 * Valid until the next call into this library from the same thread.
 */
const char *lis_last_error(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void lis_string_free(char *s);

/**
 * Parses `key = value` config text. The config is not validated.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
enum LisStatus lis_config_parse(const char *text, struct LisConfig **out);

/**
 * Reads and parses a config file. The config is not validated.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum LisStatus lis_config_load(const char *path, struct LisConfig **out);

/**
 * Config with default radio parameters and a near-square grid.
 *
 * # Safety
 * `out` must be writable.
 */
enum LisStatus lis_config_new(size_t antennas,
                              size_t modules,
                              size_t terminals,
                              size_t chains,
                              struct LisConfig **out);

/**
 * # Safety
 * `cfg` must be null or a live handle from this library.
 */
void lis_config_free(struct LisConfig *cfg);

/**
 * Checks every config invariant, including that chains divide modules.
 *
 * # Safety
 * `cfg` must be a live handle.
 */
enum LisStatus lis_config_validate(const struct LisConfig *cfg);

/**
 * Renders the config in the file format. Free the result with
 * [`lis_string_free`].
 *
 * # Safety
 * `cfg` must be a live handle; `out` must be writable.
 */
enum LisStatus lis_config_to_string(const struct LisConfig *cfg, char **out);

/**
 * Closed-form throughput figures. Chain depth may be fractional.
 *
 * # Safety
 * `cfg` must be a live handle; `out` must be writable.
 */
enum LisStatus lis_rates_report(const struct LisConfig *cfg,
                                enum LisScheme scheme,
                                struct LisReport *out);

/**
 * # Safety
 * `cfg` must be a live handle; `out` must be writable.
 */
enum LisStatus lis_topology_build(const struct LisConfig *cfg,
                                  enum LisTopologyKind topology_kind,
                                  struct LisTopology **out);

/**
 * # Safety
 * `topology` must be null or a live handle from this library.
 */
void lis_topology_free(struct LisTopology *topology);

/**
 * Number of links; 0 for a null handle.
 *
 * # Safety
 * `topology` must be null or a live handle.
 */
size_t lis_topology_link_count(const struct LisTopology *topology);

/**
 * Hop count from `module` to the central processor.
 *
 * # Safety
 * `topology` must be a live handle; `out` must be writable.
 */
enum LisStatus lis_topology_hops(const struct LisTopology *topology, size_t module, size_t *out);

/**
 * Edge list with routes. Free the result with [`lis_string_free`].
 *
 * # Safety
 * `topology` must be a live handle; `out` must be writable.
 */
enum LisStatus lis_topology_edge_list(const struct LisTopology *topology, char **out);

/**
 * New topology with link `link` removed and routes recomputed.
 *
 * # Safety
 * `topology` must be a live handle; `out` must be writable.
 */
enum LisStatus lis_topology_reroute(const struct LisTopology *topology,
                                    size_t link,
                                    struct LisTopology **out);

/**
 * Writes one buffer depth per module into `out[0..len]`; `len` must be at
 * least the module count.
 *
 * # Safety
 * `topology` must be a live handle; `out` must point to `len` writable
 * elements.
 */
enum LisStatus lis_buffer_depths(const struct LisTopology *topology, size_t *out, size_t len);

/**
 * Runs the hop-level simulator and compares against the closed forms.
 *
 * # Safety
 * `cfg` and `topology` must be live handles; `options` readable and `out`
 * writable.
 */
enum LisStatus lis_simulate(const struct LisConfig *cfg,
                            const struct LisTopology *topology,
                            const struct LisSimOptions *options,
                            struct LisSimSummary *out);

/**
 * Largest deviation of distributed from centralized beamforming (uplink,
 * downlink and buffered streaming) on a random channel drawn from `seed`.
 *
 * # Safety
 * `cfg` must be a live handle; `max_deviation` must be writable.
 */
enum LisStatus lis_verify(const struct LisConfig *cfg,
                          enum LisTopologyKind topology_kind,
                          uint64_t seed,
                          enum LisWeights weights,
                          size_t subcarriers,
                          size_t symbols,
                          double *max_deviation);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LIS_H */
