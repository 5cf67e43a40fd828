/*
 * evicoevo — engine for evidence-grounded questioner/solver co-evolution
 * over unlabeled videos: prompt construction, structured-output parsing,
 * reward and pseudo-supervision math, GRPO-ready batch emission, and
 * temporal-grounding evaluation.
 *
 * C API over the shared library. Handles are opaque; every call returns an
 * evz_status, with a human-readable detail available from evz_last_error()
 * (thread-local, valid until the next failing call on the same thread).
 * Strings returned through char** are heap-allocated; release them with
 * evz_string_free().
 */

#ifndef EVICOEVO_H
#define EVICOEVO_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum evz_status {
  EVZ_OK = 0,
  EVZ_ERR_INVALID_ARGUMENT = 1,
  EVZ_ERR_IO = 2,
  EVZ_ERR_PARSE = 3,
  EVZ_ERR_BACKEND = 4,
  EVZ_ERR_PROTOCOL = 5,
  EVZ_ERR_LOCKED = 6,
  EVZ_ERR_STATE = 7,
  EVZ_ERR_NO_VALID_ROLLOUTS = 8,
  EVZ_ERR_EMPTY_INPUT = 9,
  EVZ_ERR_UNKNOWN = 10
} evz_status;

const char* evz_version(void);
const char* evz_status_name(evz_status status);
const char* evz_last_error(void);
void evz_string_free(char* s);

/* ---------- temporal math ---------- */

/* Temporal IoU of [a_start,a_end] and [b_start,b_end] (hull denominator). */
evz_status evz_tiou(double a_start, double a_end, double b_start, double b_end,
                    double* out);

/* IoU times the start/end boundary-closeness factors, normalized by the
 * video duration. */
evz_status evz_alignment_reward(double pred_start, double pred_end,
                                double target_start, double target_end,
                                double duration_s, double* out);

/* Elementwise median span of n_spans spans packed as
 * [s0,e0,s1,e1,...]. *out_has is 0 when there is no usable consensus. */
evz_status evz_median_consensus(const double* spans, size_t n_spans,
                                double* out_start, double* out_end,
                                int* out_has);

/* Frame timestamps at 1/fps spacing, uniformly thinned to max_frames.
 * Writes up to cap values; *out_count is the full count (call with cap 0 to
 * size a buffer). */
evz_status evz_sample_frames(double duration_s, double fps, int max_frames,
                             double* out_timestamps, size_t cap,
                             size_t* out_count);

/* ---------- reward / advantage math ---------- */

/* Group-normalized advantages (r_i - mean) / (population std + eps).
 * out_advantages must hold n values; out_mean/out_std may be NULL. */
evz_status evz_group_advantages(const double* rewards, size_t n, double eps,
                                double* out_advantages, double* out_mean,
                                double* out_std);

/* with-video accuracy minus without-video accuracy. */
evz_status evz_dependency_gap(double with_acc, double without_acc,
                              double* out);

/* Key Necessity = acc_full - acc_mask; Key Specificity = acc_key - acc_rand.
 * Works on fractions or percentages alike. */
evz_status evz_key_span_metrics(double acc_full, double acc_key,
                                double acc_mask, double acc_rand,
                                double* out_necessity, double* out_specificity);

/* ---------- engine ---------- */

typedef struct evz_engine evz_engine;

/* Opens an engine over a config file (NULL for built-in defaults) plus
 * "section.key=value" override strings. Acquires the output-directory lock. */
evz_status evz_engine_open(const char* config_path,
                           const char* const* overrides, size_t n_overrides,
                           evz_engine** out);
void evz_engine_close(evz_engine* engine);

/* Runs co-evolution until `iterations` have completed (negative uses the
 * config value; 0 is a no-op). stop_after_phase, when non-NULL, stops right after that phase
 * finishes: one of questioner-opt, data-gen, pseudo-label, solver-score,
 * batch-emit. */
evz_status evz_engine_iterate(evz_engine* engine, int iterations,
                              const char* stop_after_phase);

/* Runs exactly one phase; it must match the engine state. */
evz_status evz_engine_run_phase(evz_engine* engine, const char* phase);

evz_status evz_engine_state_json(evz_engine* engine, char** out_json);

/* ---------- file-level tools (no engine needed) ---------- */

/* Scores a predictions file against a ground-truth file and returns a JSON
 * report (mIoU, R@0.3/0.5/0.7, GQA@0.3/0.5, answer accuracy; percentages at
 * two decimals). */
evz_status evz_evaluate_files(const char* predictions_path,
                              const char* ground_truth_path,
                              char** out_json_report);

/* Writes {out_dir}/conditions.jsonl with full / only-key / mask-key / random
 * frame sets per annotated question; returns a JSON summary. */
evz_status evz_evidence_plan(const char* annotations_path, const char* out_dir,
                             uint64_t seed, double fps, int max_frames,
                             char** out_json_summary);

/* Computes per-condition accuracies against the annotation reference answers
 * plus Key Necessity / Key Specificity. */
evz_status evz_evidence_report(const char* annotations_path,
                               const char* pred_full, const char* pred_key,
                               const char* pred_mask, const char* pred_rand,
                               char** out_json_report);

/* Effective configuration (defaults, then file, then overrides) as INI text. */
evz_status evz_config_dump(const char* config_path,
                           const char* const* overrides, size_t n_overrides,
                           char** out_text);

#ifdef __cplusplus
}
#endif

#endif /* EVICOEVO_H */
