#ifndef SLOTGEN_H
#define SLOTGEN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SlotgenStatus {
  SLOTGEN_STATUS_OK = 0,
  SLOTGEN_STATUS_NULL_POINTER = 1,
  SLOTGEN_STATUS_INVALID_UTF8 = 2,
  SLOTGEN_STATUS_PARSE = 3,
  SLOTGEN_STATUS_INVALID_ARGUMENT = 4,
  SLOTGEN_STATUS_IO = 5,
  SLOTGEN_STATUS_PANIC = 6,
} SlotgenStatus;

/**
 * Loaded corpus handle.
 */
typedef struct SlotgenCorpus SlotgenCorpus;

/**
 * Parsed prompt handle.
 */
typedef struct SlotgenPrompt SlotgenPrompt;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until the
 * next call into the library on the same thread.
 */
const char *slotgen_last_error(void);

/**
 * Frees a string returned by the library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void slotgen_string_free(char *s);

/**
 * Parses a single-line prompt.
 *
 * # Safety
 * `text` must be a nul-terminated string; `out` must be writable.
 */
enum SlotgenStatus slotgen_prompt_parse(const char *text, struct SlotgenPrompt **out);

/**
 * Renders a prompt to its canonical single-line form.
 *
 * # Safety
 * `prompt` must be a live handle; `out` must be writable.
 */
enum SlotgenStatus slotgen_prompt_render(const struct SlotgenPrompt *prompt, char **out);

/**
 * # Safety
 * `prompt` must be null or a live handle, freed at most once.
 */
void slotgen_prompt_free(struct SlotgenPrompt *prompt);

/**
 * Checks a generated output against its prompt. `*passed` is set, and
 * `*reason` receives the reason code on failure or null on success.
 *
 * # Safety
 * `prompt` must be a live handle, `output` nul-terminated, and both out
 * pointers writable.
 */
enum SlotgenStatus slotgen_valid_filter(const struct SlotgenPrompt *prompt,
                                        const char *output,
                                        bool *passed,
                                        char **reason);

/**
 * Parses bracket text into `{"tokens": [...], "spans": [{"number", "start",
 * "end"}]}`.
 *
 * # Safety
 * `text` must be nul-terminated; `out_json` must be writable.
 */
enum SlotgenStatus slotgen_bracket_parse(const char *text, char **out_json);

/**
 * Loads a JSONL corpus.
 *
 * # Safety
 * `path` must be nul-terminated; `out` must be writable.
 */
enum SlotgenStatus slotgen_corpus_load(const char *path, struct SlotgenCorpus **out);

/**
 * Row count, or 0 for null.
 *
 * # Safety
 * `corpus` must be null or a live handle.
 */
uintptr_t slotgen_corpus_len(const struct SlotgenCorpus *corpus);

/**
 * # Safety
 * `corpus` must be null or a live handle, freed at most once.
 */
void slotgen_corpus_free(struct SlotgenCorpus *corpus);

/**
 * Few-shot split of `intent` with `k` starters, as JSON with `starters`,
 * `remainder`, `others` and `uncovered`.
 *
 * # Safety
 * `corpus` must be a live handle, `intent` nul-terminated and `out_json`
 * writable.
 */
enum SlotgenStatus slotgen_nifs_split(const struct SlotgenCorpus *corpus,
                                      const char *intent,
                                      uintptr_t k,
                                      uint64_t seed,
                                      char **out_json);

/**
 * Evaluates a JSON array of `{reference, hypothesis}` pairs. `target_intent`
 * may be null.
 *
 * # Safety
 * `pairs_json` must be nul-terminated, `target_intent` null or
 * nul-terminated, and `out_json` writable.
 */
enum SlotgenStatus slotgen_evaluate(const char *pairs_json,
                                    const char *target_intent,
                                    char **out_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SLOTGEN_H */
