#ifndef REFSIM_H
#define REFSIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RefsimStatus {
  REFSIM_STATUS_OK = 0,
  REFSIM_STATUS_NULL_POINTER = 1,
  REFSIM_STATUS_INVALID_UTF8 = 2,
  REFSIM_STATUS_CONFIG = 3,
  REFSIM_STATUS_PARSE = 4,
  REFSIM_STATUS_IO = 5,
  REFSIM_STATUS_VERIFICATION = 6,
  REFSIM_STATUS_INVARIANT = 7,
  REFSIM_STATUS_METRIC = 8,
  REFSIM_STATUS_OUT_OF_RANGE = 9,
  REFSIM_STATUS_PANIC = 10,
} RefsimStatus;

/**
 * Simulation configuration.
 */
typedef struct RefsimConfig RefsimConfig;

/**
 * A finished, verified run.
 */
typedef struct RefsimRun RefsimRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next failing call on the same thread.
 */
const char *refsim_last_error(void);

/**
 * Library version, a static string.
 */
const char *refsim_version(void);

/**
 * Default configuration.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum RefsimStatus refsim_config_default(struct RefsimConfig **out);

/**
 * Parses configuration text (`key = value` lines with sections). Relative
 * trace paths resolve against the working directory.
 *
 * # Safety
 * `config_text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum RefsimStatus refsim_config_parse(const char *config_text, struct RefsimConfig **out);

/**
 * Sets one key; the configuration is left unchanged on error.
 *
 * # Safety
 * `cfg` must come from this library; `key` and `value` must be
 * NUL-terminated strings.
 */
enum RefsimStatus refsim_config_set(struct RefsimConfig *cfg, const char *key, const char *value);

/**
 * # Safety
 * `cfg` must come from this library or be NULL, and not be used afterwards.
 */
void refsim_config_free(struct RefsimConfig *cfg);

/**
 * Simulates `cfg`, verifying the command and refresh logs. A run that
 * breaks a timing rule or a retention deadline fails with
 * `REFSIM_STATUS_VERIFICATION` and yields no handle.
 *
 * # Safety
 * `cfg` must come from this library and `out` be a valid pointer.
 */
enum RefsimStatus refsim_run(const struct RefsimConfig *cfg, struct RefsimRun **out);

/**
 * # Safety
 * `run` must come from this library or be NULL, and not be used afterwards.
 */
void refsim_run_free(struct RefsimRun *run);

/**
 * Number of cores in the run; 0 for NULL.
 *
 * # Safety
 * `run` must come from this library or be NULL.
 */
uint32_t refsim_run_cores(const struct RefsimRun *run);

/**
 * # Safety
 * `run` must come from this library and `ipc` be a valid pointer.
 */
enum RefsimStatus refsim_run_ipc(const struct RefsimRun *run, uint32_t core, double *ipc);

/**
 * Energy per DRAM access in nJ.
 *
 * # Safety
 * `run` must come from this library and `nj` be a valid pointer.
 */
enum RefsimStatus refsim_run_energy_per_access(const struct RefsimRun *run, double *nj);

/**
 * Counts of issued all-bank and per-bank refresh commands.
 *
 * # Safety
 * `run` must come from this library; `refab` and `refpb` must be valid
 * pointers.
 */
enum RefsimStatus refsim_run_refresh_counts(const struct RefsimRun *run,
                                            uint64_t *refab,
                                            uint64_t *refpb);

/**
 * Number of DRAM commands in the run's log.
 *
 * # Safety
 * `run` must come from this library or be NULL.
 */
uint64_t refsim_run_command_count(const struct RefsimRun *run);

/**
 * Writes the run's logs and CSV files into `dir`.
 *
 * # Safety
 * `run` must come from this library and `dir` be a NUL-terminated string.
 */
enum RefsimStatus refsim_run_write_outputs(const struct RefsimRun *run, const char *dir);

/**
 * Replays command-log text under `cfg` and stores the number of
 * violations (malformed lines included).
 *
 * # Safety
 * `cfg` must come from this library, `log` be a NUL-terminated string and
 * `violations` a valid pointer.
 */
enum RefsimStatus refsim_verify_command_log(const struct RefsimConfig *cfg,
                                            const char *log,
                                            uint64_t *violations);

/**
 * Audits refresh-log text under `cfg` over `[0, end)` and stores the
 * number of violations.
 *
 * # Safety
 * `cfg` must come from this library, `log` be a NUL-terminated string and
 * `violations` a valid pointer.
 */
enum RefsimStatus refsim_audit_refresh_log(const struct RefsimConfig *cfg,
                                           const char *log,
                                           uint64_t end,
                                           uint64_t *violations);

/**
 * Sum over `n` cores of shared / alone IPC.
 *
 * # Safety
 * `shared` and `alone` must point to `n` doubles; `ws` must be valid.
 */
enum RefsimStatus refsim_weighted_speedup(const double *shared,
                                          const double *alone,
                                          size_t n,
                                          double *ws);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* REFSIM_H */
