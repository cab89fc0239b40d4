#ifndef SITCON_H
#define SITCON_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum SitconStatus {
  SITCON_STATUS_OK = 0,
  SITCON_STATUS_NULL_ARGUMENT = 1,
  SITCON_STATUS_INVALID_UTF8 = 2,
  SITCON_STATUS_INVALID_JSON = 3,
  SITCON_STATUS_KB_SCHEMA = 4,
  SITCON_STATUS_KB_INTEGRITY = 5,
  SITCON_STATUS_KB_INVALID = 6,
  SITCON_STATUS_UNSUPPORTED_LANGUAGE = 7,
  SITCON_STATUS_INVALID_OPTION = 8,
  SITCON_STATUS_INFERENCE = 9,
  SITCON_STATUS_SIMULATION = 10,
  SITCON_STATUS_INTERNAL = 99,
} SitconStatus;

// Loaded, validated knowledge base. Immutable and shareable between threads.
typedef struct SitconKb SitconKb;

// Dialog session with its own plant. Calls on one session are serialized.
typedef struct SitconSession SitconSession;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version, a static string that must not be freed.
const char *sitcon_version(void);

// Message of the last failed call on this thread, or null. Valid until
// the next call on the same thread; must not be freed.
const char *sitcon_last_error(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not have been freed already.
void sitcon_string_free(char *s);

// Loads and validates a KB document.
//
// # Safety
// `document` must be a NUL-terminated string; `out` must be writable.
enum SitconStatus sitcon_kb_load(const char *document, struct SitconKb **out);

// # Safety
// `kb` must come from [`sitcon_kb_load`] and not have been freed. Null is ignored.
void sitcon_kb_free(struct SitconKb *kb);

// Validation report of a document as JSON
// `{"valid": bool, "violations": [...], "warnings": [...]}`. Returns `Ok`
// whenever a report could be produced, including for invalid documents.
//
// # Safety
// `document` must be a NUL-terminated string; `out_json` must be writable.
enum SitconStatus sitcon_kb_validate(const char *document, char **out_json);

// Rule inference over all representation levels. `premises_json` maps
// variable names to a term label, a crisp number or a membership function.
//
// # Safety
// `kb` must be a live handle; `premises_json` a NUL-terminated string; `out_json` writable.
enum SitconStatus sitcon_infer(const struct SitconKb *kb,
                               const char *premises_json,
                               char **out_json);

// Opens a dialog session. `config_json` may be null for defaults, or an
// object with any of `language`, `policy`, `theta`, `disturbance`.
//
// # Safety
// `kb` must be a live handle; `config_json` null or NUL-terminated; `out` writable.
enum SitconStatus sitcon_session_new(const struct SitconKb *kb,
                                     const char *config_json,
                                     struct SitconSession **out);

// # Safety
// `session` must come from [`sitcon_session_new`] and not have been freed. Null is ignored.
void sitcon_session_free(struct SitconSession *session);

// One dialog turn; writes the turn response as JSON
// `{"kind", "payload", "text", "mu_D"}`. Unparseable input yields a
// clarification response, not an error status.
//
// # Safety
// `session` must be a live handle; `utterance` NUL-terminated; `out_json` writable.
enum SitconStatus sitcon_session_turn(const struct SitconSession *session,
                                      const char *utterance,
                                      char **out_json);

// Session snapshot as JSON.
//
// # Safety
// `session` must be a live handle; `out_json` writable.
enum SitconStatus sitcon_session_state(const struct SitconSession *session, char **out_json);

// Runs `steps` control cycles; writes a JSON array of tick records
// followed by a summary record.
//
// # Safety
// `session` must be a live handle; `out_json` writable.
enum SitconStatus sitcon_session_step(const struct SitconSession *session,
                                      uint32_t steps,
                                      char **out_json);

// Closed-loop run from the KB's initial plant state, as trajectory CSV.
// `config_json` may be null, or an object with `policy`, `theta`, `disturbance`.
//
// # Safety
// `kb` must be a live handle; `config_json` null or NUL-terminated; `out_csv` writable.
enum SitconStatus sitcon_simulate_csv(const struct SitconKb *kb,
                                      uint32_t steps,
                                      const char *config_json,
                                      char **out_csv);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SITCON_H */
