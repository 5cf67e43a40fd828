#include "questioner_rewards.hpp"

#include <algorithm>
#include <cctype>

#include "util.hpp"

namespace evz {

EvidenceHeuristics EvidenceHeuristics::defaults() {
  EvidenceHeuristics h;
  h.event_keywords = {
      "kick",  "throw", "catch",  "jump",  "run",   "walk",  "enter",
      "exit",  "leave", "open",   "close", "pick",  "put",   "lift",
      "drop",  "push",  "pull",   "hit",   "fall",  "turn",  "pour",
      "cut",   "grab",  "hold",   "wave",  "point", "climb", "sit",
      "stand", "dance", "cook",   "eat",   "drink", "play",  "score",
      "shoot", "pass",  "crash",  "slide", "spin",  "hug",   "hand",
      "speak", "laugh", "gesture"};
  h.temporal_keywords = {
      "before",     "after",   "then",       "while",   "during",
      "when",       "until",   "first",      "second",  "third",
      "finally",    "later",   "earlier",    "begin",   "start",
      "end",        "middle",  "moment",     "initially", "immediately",
      "subsequently", "meanwhile", "next",   "halfway"};
  return h;
}

LearnabilityResult learnability(
    std::span<const std::optional<OptionLabel>> answers, int option_count) {
  if (option_count < 1 || option_count > kOptionCount) {
    throw Error(ErrorCode::kInvalidArgument, "learnability: bad option count");
  }
  int counts[kOptionCount] = {0, 0, 0, 0};
  int valid = 0;
  for (const auto& a : answers) {
    if (a && static_cast<int>(*a) < option_count) {
      ++counts[static_cast<int>(*a)];
      ++valid;
    }
  }
  if (valid == 0) {
    throw Error(ErrorCode::kNoValidRollouts,
                "learnability: no valid rollouts");
  }
  int majority = 0;
  for (int i = 1; i < option_count; ++i) {
    if (counts[i] > counts[majority]) majority = i;  // ties keep label order
  }
  LearnabilityResult r;
  r.majority = static_cast<OptionLabel>(majority);
  r.consistency =
      static_cast<double>(counts[majority]) / static_cast<double>(answers.size());
  r.r_learn_raw = std::min(r.consistency, 1.0 - r.consistency);
  return r;
}

namespace {

double agreement(std::span<const std::optional<OptionLabel>> answers,
                 OptionLabel target) {
  int match = 0;
  int valid = 0;
  for (const auto& a : answers) {
    if (!a) continue;
    ++valid;
    if (*a == target) ++match;
  }
  if (valid == 0) {
    throw Error(ErrorCode::kNoValidRollouts,
                "video_dependency: no valid rollouts");
  }
  return static_cast<double>(match) / static_cast<double>(answers.size());
}

}  // namespace

DependencyResult video_dependency(
    std::span<const std::optional<OptionLabel>> with_video,
    std::span<const std::optional<OptionLabel>> without_video,
    OptionLabel questioner_answer) {
  if (with_video.empty() || without_video.empty()) {
    throw Error(ErrorCode::kNoValidRollouts,
                "video_dependency: empty rollout list");
  }
  DependencyResult r;
  r.delta_video = agreement(with_video, questioner_answer) -
                  agreement(without_video, questioner_answer);
  r.r_dep_raw = std::max(r.delta_video, 0.0);
  return r;
}

double merged_coverage(const SupervisionUnit& unit) {
  std::vector<std::pair<double, double>> spans;
  spans.reserve(unit.evidence.size());
  for (const Evidence& e : unit.evidence) {
    spans.emplace_back(e.span.start(), e.span.end());
  }
  std::sort(spans.begin(), spans.end());
  double covered = 0.0;
  bool open = false;
  double cur_start = 0.0;
  double cur_end = 0.0;
  for (const auto& [s, e] : spans) {
    if (!open || s > cur_end) {
      if (open) covered += cur_end - cur_start;
      cur_start = s;
      cur_end = e;
      open = true;
    } else {
      cur_end = std::max(cur_end, e);
    }
  }
  if (open) covered += cur_end - cur_start;
  return covered;
}

namespace {

// Explicit timestamps: "12s", "12.5 sec", "3 seconds", or clock marks "0:42".
bool has_timestamp(std::string_view text) {
  const std::string lower = lowercase(text);
  for (std::size_t i = 0; i < lower.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(lower[i]))) continue;
    std::size_t j = i;
    while (j < lower.size() &&
           (std::isdigit(static_cast<unsigned char>(lower[j])) ||
            lower[j] == '.')) {
      ++j;
    }
    if (j < lower.size() && lower[j] == ':' && j + 1 < lower.size() &&
        std::isdigit(static_cast<unsigned char>(lower[j + 1]))) {
      return true;
    }
    std::size_t k = j;
    while (k < lower.size() && lower[k] == ' ') ++k;
    if (lower.compare(k, 3, "sec") == 0) return true;
    if (k < lower.size() && lower[k] == 's' &&
        (k + 1 == lower.size() ||
         !std::isalnum(static_cast<unsigned char>(lower[k + 1])))) {
      return true;
    }
    i = j;
  }
  return false;
}

bool any_keyword(const SupervisionUnit& unit,
                 const std::vector<std::string>& keywords) {
  for (const Evidence& e : unit.evidence) {
    for (const std::string& kw : keywords) {
      if (contains_ci(e.description, kw)) return true;
    }
  }
  return false;
}

}  // namespace

EvidenceScore evidence_quality(const SupervisionUnit& unit,
                               const EvidenceHeuristics& heuristics) {
  EvidenceScore s;
  const double covered = merged_coverage(unit);
  const bool suppressed =
      covered > heuristics.coverage_suppression_threshold *
                    unit.video.duration_s;
  s.s_span = suppressed ? 0.0 : 0.1;

  s.s_event = any_keyword(unit, heuristics.event_keywords) ? 0.1 : 0.0;

  bool temporal = any_keyword(unit, heuristics.temporal_keywords);
  if (!temporal) {
    for (const Evidence& e : unit.evidence) {
      if (has_timestamp(e.description)) {
        temporal = true;
        break;
      }
    }
  }
  s.s_temp = temporal ? 0.1 : 0.0;

  s.r_evid = std::clamp(s.s_span + s.s_event + s.s_temp,
                        heuristics.evid_clip_lo, heuristics.evid_clip_hi);
  return s;
}

QuestionerScore questioner_reward(const FormatVerdict& verdict,
                                  const std::optional<LearnabilityResult>& learn,
                                  const std::optional<DependencyResult>& dep,
                                  const std::optional<EvidenceScore>& evid,
                                  const EvidenceHeuristics& heuristics) {
  QuestionerScore q;
  q.r_format = format_reward(verdict, heuristics.format_bonus);
  if (!verdict.ok) {
    return q;  // no bonus, no utility: total stays 0
  }
  if (learn) {
    q.consistency = learn->consistency;
    q.r_learn_raw = learn->r_learn_raw;
    if (learn->consistency >= heuristics.easy_threshold) {
      q.easy_penalty = heuristics.easy_penalty_value;
    }
  }
  if (dep) {
    q.delta_video = dep->delta_video;
    q.r_dep_raw = dep->r_dep_raw;
  }
  if (evid) {
    q.s_span = evid->s_span;
    q.s_event = evid->s_event;
    q.s_temp = evid->s_temp;
    q.r_evid = evid->r_evid;
  }
  q.r_q_total = q.r_format + heuristics.w_learn * (q.r_learn_raw * 2.0) +
                heuristics.w_dep * q.r_dep_raw + q.r_evid - q.easy_penalty;
  return q;
}

}  // namespace evz
