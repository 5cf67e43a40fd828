#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "timeline.hpp"

namespace evz {

inline constexpr int kOptionCount = 4;

enum class OptionLabel : int { kA = 0, kB = 1, kC = 2, kD = 3 };

char to_char(OptionLabel label);
std::optional<OptionLabel> label_from_char(char c);  // accepts a-d, A-D

struct Evidence {
  TimeSpan span;
  std::string description;

  friend bool operator==(const Evidence&, const Evidence&) = default;
};

// One Questioner-generated sample: evidence spans and descriptions followed
// by the question, four options, and the intended answer.
struct SupervisionUnit {
  std::string unit_id;  // assigned by the pipeline, not carried on the wire
  VideoContext video;
  std::vector<Evidence> evidence;  // 1..4 entries, spans within the video
  std::string question;
  std::array<std::string, kOptionCount> options;
  OptionLabel answer = OptionLabel::kA;
};

bool same_content(const SupervisionUnit& a, const SupervisionUnit& b);

enum class FormatFailure {
  kMissingField,
  kBadJson,
  kBadSpanOrder,
  kBadLabel,
  kSpanOutOfRange,
  kWrongOptionCount,
};

const char* to_string(FormatFailure f);
std::optional<FormatFailure> format_failure_from_string(std::string_view s);

struct FormatVerdict {
  bool ok = false;
  std::optional<FormatFailure> reason;

  static FormatVerdict pass() { return {true, std::nullopt}; }
  static FormatVerdict fail(FormatFailure f) { return {false, f}; }
};

// One parsed Solver sample. valid == true implies answer is present; a span,
// when present, has already been clamped into the video duration.
struct RolloutResponse {
  std::string raw_text;
  std::optional<OptionLabel> answer;
  std::optional<TimeSpan> span;
  bool valid = false;
};

struct QuestionerParse {
  std::optional<SupervisionUnit> unit;
  FormatVerdict verdict;
};

// Wire shape: a single JSON object, optionally inside a ``` fence, with keys
//   "evidence": [{"start": s, "end": s, "description": str}, ...]  (1..4)
//   "question": str
//   "options":  [str, str, str, str]
//   "answer":   "A".."D"
// Every malformation maps to exactly one FormatFailure; never throws.
// The returned unit has an empty unit_id.
QuestionerParse parse_questioner_output(std::string_view text,
                                        const VideoContext& video);

// Extracts the final <answer>X</answer> tag and an optional
// <span>start,end</span> tag (seconds). Missing or garbled answer yields
// valid == false; a missing or unusable span leaves span absent;
// out-of-range spans are clamped. Never throws.
RolloutResponse parse_solver_output(std::string_view text,
                                    const VideoContext& video);

// bonus iff the verdict passed, else 0.
double format_reward(const FormatVerdict& verdict, double bonus = 0.1);

// Canonical wire text; parse_questioner_output(serialize_unit(u), u.video)
// reproduces every wire-carried field of u.
std::string serialize_unit(const SupervisionUnit& unit);

}  // namespace evz
