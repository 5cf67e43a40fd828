#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "protocol.hpp"

namespace evz {

// Scorer knobs for the evidence-quality heuristic plus the reward-aggregation
// constants. Keyword lists are editable config defaults.
struct EvidenceHeuristics {
  std::vector<std::string> event_keywords;
  std::vector<std::string> temporal_keywords;
  double coverage_suppression_threshold = 0.8;
  double evid_clip_lo = 0.0;
  double evid_clip_hi = 0.3;
  double easy_threshold = 0.9;
  double easy_penalty_value = 0.1;
  double format_bonus = 0.1;
  double w_learn = 0.5;
  double w_dep = 0.3;

  static EvidenceHeuristics defaults();
};

struct LearnabilityResult {
  OptionLabel majority = OptionLabel::kA;
  double consistency = 0.0;   // c, fraction of all rollouts matching majority
  double r_learn_raw = 0.0;   // min(c, 1-c), in [0, 0.5]
};

// Majority vote over answers. Absent entries are invalid rollouts: they stay
// in the denominator and never match. Ties break by label order. Throws
// kNoValidRollouts when no entry carries a usable label.
LearnabilityResult learnability(
    std::span<const std::optional<OptionLabel>> answers,
    int option_count = kOptionCount);

struct DependencyResult {
  double delta_video = 0.0;  // with-video agreement minus without-video
  double r_dep_raw = 0.0;    // max(delta, 0)
};

// Agreement with the questioner answer under both input conditions. Invalid
// rollouts count as non-matching. Throws kNoValidRollouts when either list
// has no valid entry.
DependencyResult video_dependency(
    std::span<const std::optional<OptionLabel>> with_video,
    std::span<const std::optional<OptionLabel>> without_video,
    OptionLabel questioner_answer);

struct EvidenceScore {
  double s_span = 0.0;
  double s_event = 0.0;
  double s_temp = 0.0;
  double r_evid = 0.0;  // clamped sum
};

// s_span fires unless the merged evidence coverage exceeds the suppression
// threshold; s_event on any event keyword; s_temp on any temporal keyword or
// explicit timestamp in a description.
EvidenceScore evidence_quality(const SupervisionUnit& unit,
                               const EvidenceHeuristics& heuristics);

struct QuestionerScore {
  double r_format = 0.0;
  double consistency = 0.0;
  double r_learn_raw = 0.0;
  double delta_video = 0.0;
  double r_dep_raw = 0.0;
  double s_span = 0.0;
  double s_event = 0.0;
  double s_temp = 0.0;
  double r_evid = 0.0;
  double easy_penalty = 0.0;
  double r_q_total = 0.0;
};

// r_q_total = r_format + w_learn * (r_learn_raw * 2) + w_dep * r_dep_raw
//             + r_evid - easy_penalty.
// A failed verdict zeroes every term. Components a caller could not compute
// (no valid rollouts) are passed absent and contribute zero utility.
QuestionerScore questioner_reward(const FormatVerdict& verdict,
                                  const std::optional<LearnabilityResult>& learn,
                                  const std::optional<DependencyResult>& dep,
                                  const std::optional<EvidenceScore>& evid,
                                  const EvidenceHeuristics& heuristics);

// Union length of the unit's evidence spans, for the suppression rule.
double merged_coverage(const SupervisionUnit& unit);

}  // namespace evz
