#ifndef PROBGAME_H
#define PROBGAME_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PgDomain {
  PG_DOMAIN_INTERVAL = 0,
  PG_DOMAIN_CONGRUENCE = 1,
  PG_DOMAIN_PRODUCT = 2,
} PgDomain;

typedef enum PgHeuristic {
  PG_HEURISTIC_MASS = 0,
  PG_HEURISTIC_DEPTH = 1,
  PG_HEURISTIC_MIXED = 2,
} PgHeuristic;

typedef enum PgQuery {
  PG_QUERY_MAX = 0,
  PG_QUERY_MIN = 1,
  PG_QUERY_BOTH = 2,
} PgQuery;

typedef enum PgStatus {
  PG_STATUS_OK = 0,
  PG_STATUS_NULL_ARGUMENT = 1,
  PG_STATUS_INVALID_UTF8 = 2,
  PG_STATUS_PARSE_ERROR = 3,
  PG_STATUS_INVALID_ARGUMENT = 4,
  PG_STATUS_ORACLE_ERROR = 5,
  PG_STATUS_ANALYSIS_ERROR = 6,
  /**
   * The refinement loop ran out of rounds or candidates; bounds are valid.
   */
  PG_STATUS_BUDGET_EXHAUSTED = 7,
  PG_STATUS_PANIC = 8,
} PgStatus;

/**
 * Opaque parsed program.
 */
typedef struct PgProgram PgProgram;

typedef struct PgConcrete {
  double max;
  double min;
  uint64_t states;
  uint64_t configurations;
} PgConcrete;

typedef struct PgAnalyzeConfig {
  enum PgDomain domain;
  enum PgQuery query;
  enum PgHeuristic heuristic;
  uint32_t candidates;
  uint32_t depth_threshold;
  double gap_target;
  double tol;
  uint32_t max_rounds;
  uint64_t node_budget;
  /**
   * Variable name for control-variable widening; NULL widens per command.
   */
  const char *widen_var;
} PgAnalyzeConfig;

/**
 * Final bounds of an analysis; the fields of a query not asked for are NaN.
 */
typedef struct PgBounds {
  double max_lower;
  double max_upper;
  double min_lower;
  double min_upper;
  uint32_t rounds;
  uint64_t game_nodes_max;
  bool converged;
} PgBounds;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer is
 * valid until the next call into the library on the same thread.
 */
const char *pg_last_error(void);

/**
 * Parses program text into a new handle stored in `*out`.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum PgStatus pg_program_parse(const char *text, struct PgProgram **out);

/**
 * Releases a handle; NULL is ignored.
 *
 * # Safety
 * `p` must come from `pg_program_parse` and not be freed twice.
 */
void pg_program_free(struct PgProgram *p);

/**
 * Number of declared variables, or 0 for NULL.
 *
 * # Safety
 * `p` must be NULL or a live handle.
 */
size_t pg_program_num_vars(const struct PgProgram *p);

/**
 * Exact extremal reachability values by explicit enumeration.
 *
 * # Safety
 * `p` must be a live handle and `out` a valid pointer.
 */
enum PgStatus pg_concrete(const struct PgProgram *p,
                          uint64_t max_states,
                          double tol,
                          struct PgConcrete *out);

/**
 * The command-line defaults: interval domain, both queries, mixed
 * heuristic, 15 candidates, depth 4, gap 0.01.
 */
struct PgAnalyzeConfig pg_analyze_config_default(void);

/**
 * Runs the refinement loop. `*out` is filled on `PG_STATUS_OK` and on
 * `PG_STATUS_BUDGET_EXHAUSTED`.
 *
 * # Safety
 * `p` must be a live handle; `cfg` and `out` valid pointers.
 */
enum PgStatus pg_analyze(const struct PgProgram *p,
                         const struct PgAnalyzeConfig *cfg,
                         struct PgBounds *out);

/**
 * Like `pg_analyze`, returning the JSON report printed by the
 * command-line tool. Release it with `pg_string_free`.
 *
 * # Safety
 * `p` must be a live handle; `cfg` and `out` valid pointers.
 */
enum PgStatus pg_analyze_json(const struct PgProgram *p,
                              const struct PgAnalyzeConfig *cfg,
                              char **out);

/**
 * Releases a string returned by the library; NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void pg_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PROBGAME_H */
