#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "protocol.hpp"
#include "questioner_rewards.hpp"

namespace evz {

enum class PseudoOrigin { kConsensus, kQuestionerFallback, kNone };

const char* to_string(PseudoOrigin origin);
std::optional<PseudoOrigin> pseudo_origin_from_string(std::string_view s);

struct PseudoLabel {
  OptionLabel label = OptionLabel::kA;
  double support = 0.0;          // matching rollouts over all n rollouts
  std::optional<TimeSpan> span;  // consensus or questioner fallback
  PseudoOrigin origin = PseudoOrigin::kNone;
};

// Majority vote over all rollouts (invalid ones never match but stay in the
// denominator); the span is the median consensus over agreeing rollouts'
// spans, falling back to the unit's first evidence span when the consensus is
// absent or degenerate. Throws kNoValidRollouts when every rollout is invalid.
PseudoLabel derive_pseudo_label(std::span<const RolloutResponse> rollouts,
                                const SupervisionUnit& unit);

struct CurriculumGate {
  double s_min = 0.3;
  double s_max = 0.8;
};

// Inclusive on both ends.
bool gate_retains(const PseudoLabel& label, const CurriculumGate& gate);

struct DatasetRecord {
  SupervisionUnit unit;
  int iteration = 0;
  PseudoLabel pseudo;
  QuestionerScore scores;
};

struct DatasetBuildInput {
  SupervisionUnit unit;
  FormatVerdict verdict;
  std::vector<RolloutResponse> rollouts;
  QuestionerScore scores;
  int iteration = 0;
};

struct BuildReport {
  int generated = 0;
  int dropped_format = 0;
  int dropped_no_label = 0;
  int dropped_gate = 0;
  int retained = 0;
};

// Keeps entries that pass format validation, pseudo-label derivation, and the
// curriculum gate; output is ordered by unit_id. Drops are counted, never
// thrown.
std::vector<DatasetRecord> build_dataset(
    const std::vector<DatasetBuildInput>& inputs, const CurriculumGate& gate,
    BuildReport* report = nullptr);

// Dataset record wire format (JSON-Lines):
//   {"unit_id", "iter", "video": {"id","uri","duration_s"},
//    "evidence": [{"start","end","description"}], "question", "options",
//    "answer_q", "pseudo": {"label","support","span","origin"},
//    "scores": {...}}
std::string serialize_dataset_record(const DatasetRecord& record);
DatasetRecord parse_dataset_record(const std::string& line);

void write_dataset_jsonl(const std::filesystem::path& path,
                         const std::vector<DatasetRecord>& records);
std::vector<DatasetRecord> read_dataset_jsonl(
    const std::filesystem::path& path);

}  // namespace evz
