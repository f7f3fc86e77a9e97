/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef NEUROP_H
#define NEUROP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum NeuropStatus {
  NEUROP_STATUS_OK = 0,
  NEUROP_STATUS_NULL_ARGUMENT = 1,
  NEUROP_STATUS_INVALID_UTF8 = 2,
  /**
   * File or directory missing or unreadable.
   */
  NEUROP_STATUS_IO = 3,
  /**
   * Exam JSON or a KB file could not be parsed.
   */
  NEUROP_STATUS_PARSE = 4,
  /**
   * Exam failed validation or interpretation.
   */
  NEUROP_STATUS_VALIDATION = 5,
  NEUROP_STATUS_UNKNOWN_NERVE = 6,
  NEUROP_STATUS_INVALID_CHAIN = 7,
  NEUROP_STATUS_PANIC = 99,
} NeuropStatus;

typedef enum NeuropNerveDx {
  NEUROP_NERVE_DX_NORMAL = 0,
  NEUROP_NERVE_DX_FOCAL = 1,
  NEUROP_NERVE_DX_MULTIPLE_FOCAL = 2,
  NEUROP_NERVE_DX_DIFFUSE = 3,
} NeuropNerveDx;

/**
 * Opaque knowledge base handle.
 */
typedef struct NeuropKb NeuropKb;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Loads the knowledge base compiled into the library.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage.
 */
enum NeuropStatus neurop_kb_load_builtin(struct NeuropKb **out);

/**
 * Loads a KB directory. On failure `*out` is left untouched and the last
 * error lists every failing file.
 *
 * # Safety
 * `dir` must be a NUL-terminated string and `out` a valid pointer.
 */
enum NeuropStatus neurop_kb_load(const char *dir, struct NeuropKb **out);

/**
 * Releases a KB handle. Null is ignored.
 *
 * # Safety
 * `kb` must come from a load function and not be used afterwards.
 */
void neurop_kb_free(struct NeuropKb *kb);

/**
 * Hex content hash of the loaded KB files.
 *
 * # Safety
 * `kb` must be a live handle and `out` a valid pointer.
 */
enum NeuropStatus neurop_kb_fingerprint(const struct NeuropKb *kb, char **out);

/**
 * Diagnoses an exam given as JSON text and writes the JSON report.
 *
 * # Safety
 * `kb` must be a live handle, `exam_json` a NUL-terminated string and
 * `out` a valid pointer.
 */
enum NeuropStatus neurop_diagnose_json(const struct NeuropKb *kb,
                                       const char *exam_json,
                                       char **out);

/**
 * The 62-row chain enumeration with oracle agreement, as JSON.
 *
 * # Safety
 * `kb` must be a live handle and `out` a valid pointer.
 */
enum NeuropStatus neurop_enumerate_json(const struct NeuropKb *kb, char **out);

/**
 * Runs the nerve automaton over `len` symbols, each 0 or 1.
 *
 * # Safety
 * `kb` must be a live handle, `bits` must point to `len` readable bytes and
 * `out` must be a valid pointer.
 */
enum NeuropStatus neurop_chain_diagnose(const struct NeuropKb *kb,
                                        const uint8_t *bits,
                                        size_t len,
                                        enum NeuropNerveDx *out);

/**
 * Message for the last failed call on this thread, or null. Valid until
 * the next call into the library on the same thread.
 */
const char *neurop_last_error_message(void);

/**
 * Releases a string returned by the library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void neurop_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NEUROP_H */
