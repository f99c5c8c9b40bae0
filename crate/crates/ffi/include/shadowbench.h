#ifndef SHADOWBENCH_H
#define SHADOWBENCH_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ShbStatus {
  SHB_STATUS_OK = 0,
  SHB_STATUS_NULL_POINTER = 1,
  SHB_STATUS_INVALID_ARGUMENT = 2,
  SHB_STATUS_PARSE = 3,
  SHB_STATUS_ENGINE = 4,
  SHB_STATUS_AGENT = 5,
  SHB_STATUS_BUFFER_TOO_SMALL = 6,
  SHB_STATUS_PANIC = 7,
} ShbStatus;

typedef enum ShbGameStatus {
  SHB_GAME_STATUS_RUNNING = 0,
  SHB_GAME_STATUS_WIN = 1,
  SHB_GAME_STATUS_LOSS = 2,
} ShbGameStatus;

typedef enum ShbAgentKind {
  SHB_AGENT_KIND_RANDOM = 0,
  SHB_AGENT_KIND_OSLA = 1,
  SHB_AGENT_KIND_MCS = 2,
  SHB_AGENT_KIND_MCTS = 3,
} ShbAgentKind;

typedef struct ShbAgent ShbAgent;

typedef struct ShbGame ShbGame;

typedef struct ShbPolicy ShbPolicy;

typedef struct ShbFeatures {
  double min_d_mov;
  double min_d_npc;
  double sum_d_npc;
  uint32_t n_npc;
  double min_d_portal;
} ShbFeatures;

typedef struct ShbNodeContext {
  double max_r;
  double mean_reward;
  uint32_t child_visits;
  uint32_t parent_visits;
  struct ShbFeatures features;
} ShbNodeContext;

// Scalar part of a decision; `p` and `v` go to caller buffers.
typedef struct ShbDecision {
  uint32_t a_star;
  uint32_t n_actions;
  double b;
  double conv;
  uint32_t calls;
} ShbDecision;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or an empty string.
// Same buffer protocol as [`shb_policy_render`].
//
// # Safety
// `buf` must point to `len` writable bytes (or be null); `needed` may be null.
enum ShbStatus shb_last_error(char *buf, size_t len, size_t *needed);

// # Safety
// `text` must be a NUL-terminated string; `out` a valid pointer.
enum ShbStatus shb_policy_parse(const char *text, struct ShbPolicy **out);

// The reference heuristic.
//
// # Safety
// `out` must be a valid pointer.
enum ShbStatus shb_policy_reference(struct ShbPolicy **out);

// # Safety
// `policy` must come from this library and not be freed twice.
void shb_policy_free(struct ShbPolicy *policy);

// # Safety
// All pointers must be valid.
enum ShbStatus shb_policy_eval(const struct ShbPolicy *policy,
                               const struct ShbNodeContext *ctx,
                               double *out);

// Canonical rendering. Call with a null `buf` to learn the size.
//
// # Safety
// `policy` must be valid; `buf` must point to `len` writable bytes or be null.
enum ShbStatus shb_policy_render(const struct ShbPolicy *policy,
                                 char *buf,
                                 size_t len,
                                 size_t *needed);

// Number of distinct prunings, the policy itself included.
//
// # Safety
// All pointers must be valid.
enum ShbStatus shb_policy_pruning_count(const struct ShbPolicy *policy, size_t *out);

// The `index`-th pruning as a new policy handle.
//
// # Safety
// All pointers must be valid.
enum ShbStatus shb_policy_pruning(const struct ShbPolicy *policy,
                                  size_t index,
                                  struct ShbPolicy **out);

// Loads a bundled level. The environment random stream is the one a
// playthrough with the same seed would use.
//
// # Safety
// `game` must be a NUL-terminated string; `out` a valid pointer.
enum ShbStatus shb_game_load(const char *game, uint32_t level, uint64_t seed, struct ShbGame **out);

// # Safety
// `game` must come from this library and not be freed twice.
void shb_game_free(struct ShbGame *game);

// Legal action count; 0 once the game is over.
//
// # Safety
// All pointers must be valid.
enum ShbStatus shb_game_num_actions(const struct ShbGame *game, uint32_t *out);

// Name of legal action `index` (e.g. `LEFT`).
//
// # Safety
// `game` must be valid; `buf` must point to `len` writable bytes or be null.
enum ShbStatus shb_game_action_name(const struct ShbGame *game,
                                    uint32_t index,
                                    char *buf,
                                    size_t len,
                                    size_t *needed);

// Plays legal action `index` in the real environment.
//
// # Safety
// `game` must be valid.
enum ShbStatus shb_game_step(struct ShbGame *game, uint32_t index);

// # Safety
// All pointers must be valid; any of `status`, `score`, `tick` may be null.
enum ShbStatus shb_game_info(const struct ShbGame *game,
                             enum ShbGameStatus *status,
                             double *score,
                             uint32_t *tick);

// # Safety
// All pointers must be valid.
enum ShbStatus shb_game_features(const struct ShbGame *game, struct ShbFeatures *out);

// Creates an agent. `policy` (MCTS only) is an expression or `ucb`;
// `rollout_depth` 0 and `alpha` NaN select the defaults.
//
// # Safety
// `policy` must be NUL-terminated or null; `out` a valid pointer.
enum ShbStatus shb_agent_new(enum ShbAgentKind kind,
                             const char *policy,
                             uint32_t rollout_depth,
                             double alpha,
                             uint64_t seed,
                             struct ShbAgent **out);

// # Safety
// `agent` must come from this library and not be freed twice.
void shb_agent_free(struct ShbAgent *agent);

// One decision on the game's current state with a fresh meter of `cap`
// calls. `p` and `v` must each hold `len` doubles, `len` at least the
// legal action count; NaN in `v` marks "no estimate".
//
// # Safety
// All pointers must be valid and the buffers at least `len` long.
enum ShbStatus shb_agent_decide(struct ShbAgent *agent,
                                const struct ShbGame *game,
                                uint32_t cap,
                                struct ShbDecision *out,
                                double *p,
                                double *v,
                                size_t len);

// Half-sum symmetric KL divergence of two length-`n` distributions.
//
// # Safety
// `p` and `q` must each point to `n` doubles.
enum ShbStatus shb_sym_kl(const double *p, const double *q, size_t n, double *out);

// Runs one main/shadow playthrough and writes its JSONL log into `buf`.
// Agents are described as for [`shb_agent_new`] minus the seed.
//
// # Safety
// String arguments must be NUL-terminated (policies may be null); `buf`
// must point to `len` writable bytes or be null.
enum ShbStatus shb_run_playthrough(const char *game,
                                   uint32_t level,
                                   enum ShbAgentKind main_kind,
                                   const char *main_policy,
                                   enum ShbAgentKind shadow_kind,
                                   const char *shadow_policy,
                                   uint32_t cap,
                                   uint64_t seed,
                                   char *buf,
                                   size_t len,
                                   size_t *needed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SHADOWBENCH_H */
