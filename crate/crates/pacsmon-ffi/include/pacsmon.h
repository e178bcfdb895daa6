/* C ABI for the pacsmon instant-payment monitoring pipeline. */

#pragma once

/* Generated with cbindgen:0.29.4 */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible call.
enum PacsmonStatus
#if defined(__cplusplus) || __STDC_VERSION__ >= 202311L
  : int32_t
#endif // defined(__cplusplus) || __STDC_VERSION__ >= 202311L
 {
  PACSMON_STATUS_OK = 0,
  PACSMON_STATUS_NULL_ARGUMENT = -1,
  PACSMON_STATUS_INVALID_UTF8 = -2,
  PACSMON_STATUS_PARSE_ERROR = -3,
  PACSMON_STATUS_INVALID_CONFIG = -4,
  // The event failed leg-signature or timestamp validation; it was
  // counted and skipped, the session stays usable.
  PACSMON_STATUS_INVALID_EVENT = -5,
  // The session was already finished.
  PACSMON_STATUS_FINISHED = -6,
  PACSMON_STATUS_IO_ERROR = -7,
  PACSMON_STATUS_INTERNAL = -8,
};
#ifndef __cplusplus
#if __STDC_VERSION__ >= 202311L
typedef enum PacsmonStatus PacsmonStatus;
#else
typedef int32_t PacsmonStatus;
#endif // __STDC_VERSION__ >= 202311L
#endif // __cplusplus

// Opaque streaming session: correlate, aggregate, detect, explain.
typedef struct pacsmon_session pacsmon_session;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Releases a string returned by any `pacsmon_*` function.
//
// # Safety
// `s` must be a pointer previously returned by this library and not yet
// freed; NULL is ignored.
void pacsmon_string_free(char *s);

// Library version as a static string; do not free.
const char *pacsmon_version(void);

// JSON array of built-in scenario names; free with `pacsmon_string_free`.
char *pacsmon_scenario_names(void);

// Creates a session. `config_json` is an optional pipeline configuration
// document (pass NULL for defaults). On failure returns NULL and, when
// `status_out` is non-NULL, writes the failure code there.
//
// # Safety
// `config_json`, when non-NULL, must point to a NUL-terminated string;
// `status_out`, when non-NULL, must point to writable memory.
struct pacsmon_session *pacsmon_session_new(const char *config_json, int32_t *status_out);

// Feeds one trace event (a JSONL line). Invalid events return
// `InvalidEvent` but leave the session usable; anything emitted becomes
// available through the `next_*` functions.
//
// # Safety
// `session` must come from `pacsmon_session_new` and not be freed;
// `event_json` must be NUL-terminated.
int32_t pacsmon_session_push_event(struct pacsmon_session *session, const char *event_json);

// Flushes the session: evicts pending transactions and closes every
// remaining bin. Idempotent.
//
// # Safety
// `session` must come from `pacsmon_session_new` and not be freed.
int32_t pacsmon_session_finish(struct pacsmon_session *session);

// Next score record as a JSON string, or NULL when drained.
// Free with `pacsmon_string_free`.
//
// # Safety
// `session` must come from `pacsmon_session_new` and not be freed.
char *pacsmon_session_next_score(struct pacsmon_session *session);

// Next verdict as a JSON string, or NULL when drained.
// Free with `pacsmon_string_free`.
//
// # Safety
// `session` must come from `pacsmon_session_new` and not be freed.
char *pacsmon_session_next_verdict(struct pacsmon_session *session);

// Next settled payment as a JSON string, or NULL when drained.
// Free with `pacsmon_string_free`.
//
// # Safety
// `session` must come from `pacsmon_session_new` and not be freed.
char *pacsmon_session_next_payment(struct pacsmon_session *session);

// Run summary as a JSON string (complete after finish).
// Free with `pacsmon_string_free`.
//
// # Safety
// `session` must come from `pacsmon_session_new` and not be freed.
char *pacsmon_session_summary(struct pacsmon_session *session);

// Message for the most recent error on this session, or NULL. The pointer
// is borrowed: valid until the next call on the same session; do not free.
//
// # Safety
// `session` must come from `pacsmon_session_new` and not be freed.
const char *pacsmon_session_last_error(struct pacsmon_session *session);

// Destroys a session.
//
// # Safety
// `session` must come from `pacsmon_session_new` and not be freed twice;
// NULL is ignored.
void pacsmon_session_free(struct pacsmon_session *session);

// Generates a built-in scenario to `trace_path` (JSONL) and, when
// `gt_path` is non-NULL, its ground-truth sidecar. Convenience for
// bindings that want test traffic without shelling out to the CLI.
//
// # Safety
// `name` and `trace_path` must be NUL-terminated; `gt_path` may be NULL.
int32_t pacsmon_simulate_scenario(const char *name,
                                  uint64_t seed,
                                  const char *trace_path,
                                  const char *gt_path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus
