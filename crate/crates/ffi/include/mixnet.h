#ifndef MIXNET_H
#define MIXNET_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every call.
 */
typedef enum MixStatus {
  MIX_STATUS_OK = 0,
  MIX_STATUS_NULL_POINTER = 1,
  MIX_STATUS_INVALID_ARGUMENT = 2,
  MIX_STATUS_ILLEGAL_MOVE = 3,
  MIX_STATUS_GAME_OVER = 4,
  MIX_STATUS_CONFIG_ERROR = 5,
  MIX_STATUS_SEARCH_ERROR = 6,
  MIX_STATUS_PANIC = 7,
} MixStatus;

/**
 * Side to move.
 */
typedef enum MixColor {
  MIX_COLOR_BLACK = 0,
  MIX_COLOR_WHITE = 1,
} MixColor;

/**
 * Opaque engine handle.
 */
typedef struct MixEngine MixEngine;

/**
 * Outcome of [`mix_engine_search`].
 */
typedef struct MixSearchResult {
  uint32_t row;
  uint32_t col;
  /**
   * Win, loss and draw probability for the side to move.
   */
  double win;
  double loss;
  double draw;
  /**
   * Alpha-beta score; meaningful when `has_score` is 1.
   */
  int32_t score;
  uint8_t has_score;
  uint64_t nodes;
  uint32_t depth;
} MixSearchResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a
 * success. Valid until the next call on the same thread.
 */
const char *mix_last_error_message(void);

/**
 * Library version, a static string.
 */
const char *mix_version(void);

/**
 * Creates an engine from a TOML config (null for defaults) and stores the
 * handle in `*out`.
 *
 * # Safety
 * `config_toml` is null or a NUL-terminated string; `out` is writable.
 */
enum MixStatus mix_engine_new(const char *config_toml, struct MixEngine **out);

/**
 * Releases an engine. Null is ignored.
 *
 * # Safety
 * `handle` came from [`mix_engine_new`] and is not used afterwards.
 */
void mix_engine_free(struct MixEngine *handle);

/**
 * Clears the board and sets its size.
 *
 * # Safety
 * `handle` is a live engine.
 */
enum MixStatus mix_engine_new_game(struct MixEngine *handle, uint32_t size);

/**
 * Plays a move for the side to move.
 *
 * # Safety
 * `handle` is a live engine.
 */
enum MixStatus mix_engine_play(struct MixEngine *handle, uint32_t row, uint32_t col);

/**
 * Takes back the last move.
 *
 * # Safety
 * `handle` is a live engine.
 */
enum MixStatus mix_engine_undo(struct MixEngine *handle);

/**
 * Writes the side to move.
 *
 * # Safety
 * `handle` is a live engine and `out` is writable.
 */
enum MixStatus mix_engine_side_to_move(struct MixEngine *handle, enum MixColor *out);

/**
 * Searches the current position without playing the move. `budget` is
 * the playout or node count; 0 uses the configured per-move time.
 *
 * # Safety
 * `handle` is a live engine and `out` is writable.
 */
enum MixStatus mix_engine_search(struct MixEngine *handle,
                                 uint64_t budget,
                                 struct MixSearchResult *out);

/**
 * Static evaluation of the current position: the policy over all cells
 * in row-major order (`len` must be at least size * size) and the
 * win/loss/draw triple.
 *
 * # Safety
 * `handle` is a live engine, `policy` holds `len` floats and `value`
 * holds three doubles.
 */
enum MixStatus mix_engine_evaluate(struct MixEngine *handle,
                                   float *policy,
                                   uintptr_t len,
                                   double *value);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MIXNET_H */
