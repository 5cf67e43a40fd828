#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "protocol.hpp"
#include "util.hpp"

namespace evz {

struct EvalRecord {
  std::string question_id;
  std::optional<OptionLabel> gt_answer;
  std::optional<TimeSpan> gt_span;
  RolloutResponse pred;
  double duration_s = 0.0;
};

struct GroundingMetrics {
  double miou = 0.0;
  double r_at_03 = 0.0;
  double r_at_05 = 0.0;
  double r_at_07 = 0.0;
};

// Per-record tIoU against the ground-truth span, 0 when the prediction has no
// usable span; mIoU is the mean, R@t the fraction at or above t. Throws on
// empty input or a record without gt_span.
GroundingMetrics grounding_metrics(std::span<const EvalRecord> records);

struct GqaMetrics {
  double gqa_at_03 = 0.0;
  double gqa_at_05 = 0.0;
};

// Fraction with a correct answer AND span tIoU at or above the threshold.
// Records need both gt_answer and gt_span.
GqaMetrics gqa_metrics(std::span<const EvalRecord> records);

double dependency_gap(double with_acc, double without_acc);

struct KeySpanMetrics {
  double necessity = 0.0;    // acc_full - acc_mask
  double specificity = 0.0;  // acc_key - acc_rand
};

KeySpanMetrics key_span_metrics(double acc_full, double acc_key,
                                double acc_mask, double acc_rand);

// Frame index sets for the four evaluation conditions. only_key and mask_key
// partition full; |random| == |only_key|. Frame membership in a span is
// start-inclusive, end-exclusive.
struct FrameConditionPlan {
  std::vector<std::size_t> full;
  std::vector<std::size_t> only_key;
  std::vector<std::size_t> mask_key;
  std::vector<std::size_t> random;
  double random_start = 0.0;
  double random_end = 0.0;
  bool only_key_empty = false;  // warning: no sampled frame fell in the key
};

// The random span has the key span's length and is placed uniformly over the
// non-overlapping feasible positions, overlapping only when none exists. Its
// frame subset is truncated or padded by frames nearest the span center until
// it matches |only_key|.
FrameConditionPlan frame_condition_plan(std::span<const double> frames,
                                        const TimeSpan& key, double duration_s,
                                        Rng& rng);

// ---- file-level tools ----
// Predictions: JSON-Lines {"question_id", "answer": label|null,
//                          "span": [s,e]|null}
// Ground truth: same keys plus "duration_s".
// Prediction spans must satisfy 0 <= s < e <= duration to count; anything
// else scores as incorrect. Ground-truth rows without a matching prediction
// score as incorrect.
struct EvalReport {
  std::string json;  // {"metric": value} with percentages at two decimals
};

EvalReport evaluate_files(const std::filesystem::path& predictions_path,
                          const std::filesystem::path& ground_truth_path);

// Annotations: JSON-Lines {"question_id", "ref_answer", "key_span": [s,e],
//                          "duration_s"}.
// Writes {out_dir}/conditions.jsonl with per-question frame timestamp lists
// for the four conditions; returns a JSON summary.
std::string evidence_plan_files(const std::filesystem::path& annotations_path,
                                const std::filesystem::path& out_dir,
                                std::uint64_t seed, double fps, int max_frames);

// Scores the four per-condition prediction files against the annotations'
// reference answers and reports accuracies plus necessity/specificity.
std::string evidence_report_files(
    const std::filesystem::path& annotations_path,
    const std::filesystem::path& pred_full, const std::filesystem::path& pred_key,
    const std::filesystem::path& pred_mask, const std::filesystem::path& pred_rand);

}  // namespace evz
