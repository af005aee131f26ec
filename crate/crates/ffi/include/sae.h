#ifndef SAE_H
#define SAE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum SaeStatus {
  SAE_STATUS_OK = 0,
  SAE_STATUS_NULL_ARGUMENT = 1,
  SAE_STATUS_INVALID_UTF8 = 2,
  SAE_STATUS_UNKNOWN_SCENARIO = 3,
  SAE_STATUS_INVALID_SCENARIO = 4,
  SAE_STATUS_INVALID_ARGUMENT = 5,
  SAE_STATUS_SIMULATION_FAILED = 6,
  SAE_STATUS_OUT_OF_RANGE = 7,
  SAE_STATUS_PANIC = 8,
} SaeStatus;

/**
 * Explorer verdict as a C enum.
 */
typedef enum SaeVerdict {
  SAE_VERDICT_PASS = 0,
  SAE_VERDICT_FAIL = 1,
  SAE_VERDICT_BOUND_REACHED = 2,
} SaeVerdict;

/**
 * Explorer verdicts for a list of properties.
 */
typedef struct SaeExploration SaeExploration;

/**
 * A finished run with its trace and expectation outcomes.
 */
typedef struct SaeReport SaeReport;

/**
 * A scenario: devices, SME script, adversary script, expectations.
 */
typedef struct SaeScenario SaeScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * Valid until the next call on the same thread.
 */
const char *sae_last_error(void);

/**
 * Library version, static storage.
 */
const char *sae_version(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void sae_string_free(char *s);

/**
 * Looks up a built-in scenario by name.
 *
 * # Safety
 * `name` must be a nul-terminated string; `out` a valid pointer.
 */
enum SaeStatus sae_scenario_builtin(const char *name, struct SaeScenario **out);

/**
 * Parses a scenario from TOML.
 *
 * # Safety
 * `toml` must be a nul-terminated string; `out` a valid pointer.
 */
enum SaeStatus sae_scenario_from_toml(const char *toml, struct SaeScenario **out);

/**
 * Serialises a scenario to TOML.
 *
 * # Safety
 * `s` must be a live scenario; `out` a valid pointer.
 */
enum SaeStatus sae_scenario_to_toml(const struct SaeScenario *s, char **out);

/**
 * Selects a preset, `spec2020` or `patched`, dropping flag overrides.
 *
 * # Safety
 * `s` must be a live scenario; `preset` a nul-terminated string.
 */
enum SaeStatus sae_scenario_set_mode(struct SaeScenario *s, const char *preset);

/**
 * Sets one mode flag on top of the current mode.
 *
 * # Safety
 * `s` must be a live scenario; `flag` a nul-terminated string.
 */
enum SaeStatus sae_scenario_set_flag(struct SaeScenario *s, const char *flag, bool value);

/**
 * # Safety
 * `s` must be a live scenario.
 */
enum SaeStatus sae_scenario_set_seed(struct SaeScenario *s, uint64_t seed);

/**
 * # Safety
 * `s` must come from this library and not have been freed. Null is ignored.
 */
void sae_scenario_free(struct SaeScenario *s);

/**
 * Runs a scenario through the simulator and checks its expectations.
 *
 * # Safety
 * `s` must be a live scenario; `out` a valid pointer.
 */
enum SaeStatus sae_run(const struct SaeScenario *s, struct SaeReport **out);

/**
 * Whether every expectation for the run's mode held.
 *
 * # Safety
 * `r` must be a live report; `holds` a valid pointer.
 */
enum SaeStatus sae_report_holds(const struct SaeReport *r, bool *holds);

/**
 * The run's trace as JSON lines.
 *
 * # Safety
 * `r` must be a live report; `out` a valid pointer.
 */
enum SaeStatus sae_report_trace_jsonl(const struct SaeReport *r, char **out);

/**
 * # Safety
 * `r` must come from this library and not have been freed. Null is ignored.
 */
void sae_report_free(struct SaeReport *r);

/**
 * Explores the scenario's setup. `props` is a comma-separated property
 * list (`all` allowed); `max_states` 0 means the library default.
 *
 * # Safety
 * `s` must be a live scenario; `props` a nul-terminated string; `out` a
 * valid pointer.
 */
enum SaeStatus sae_explore(const struct SaeScenario *s,
                           const char *props,
                           uint32_t adversary_bound,
                           uint32_t step_bound,
                           size_t max_states,
                           struct SaeExploration **out);

/**
 * Number of property results.
 *
 * # Safety
 * `e` must be a live exploration; `n` a valid pointer.
 */
enum SaeStatus sae_exploration_len(const struct SaeExploration *e, size_t *n);

/**
 * Verdict of result `i`.
 *
 * # Safety
 * `e` must be a live exploration; `v` a valid pointer.
 */
enum SaeStatus sae_exploration_verdict(const struct SaeExploration *e,
                                       size_t i,
                                       enum SaeVerdict *v);

/**
 * All results as JSON lines, one object per property.
 *
 * # Safety
 * `e` must be a live exploration; `out` a valid pointer.
 */
enum SaeStatus sae_exploration_jsonl(const struct SaeExploration *e, char **out);

/**
 * # Safety
 * `e` must come from this library and not have been freed. Null is ignored.
 */
void sae_exploration_free(struct SaeExploration *e);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SAE_H */
