#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "backend.hpp"
#include "pseudo_supervision.hpp"
#include "protocol.hpp"

namespace evz {

struct SolverScore {
  bool correct = false;
  double r_align = 0.0;
  double r_s = 0.0;
  double alpha = 0.5;
};

// r_s = 1[answer matches pseudo label] * (1 + alpha * r_align), with r_align
// the alignment reward against the pseudo span when both spans exist. Wrong
// or invalid predictions score 0; a correct answer without a span earns
// exactly 1. Throws when the label carries no span origin or T <= 0.
SolverScore solver_reward(const RolloutResponse& pred, const PseudoLabel& label,
                          double duration_s, double alpha);

struct AdvantageGroup {
  std::vector<double> rewards;
  double mean = 0.0;
  double stddev = 0.0;  // population
  double eps = 1e-6;
  std::vector<double> advantages;  // (r_i - mean) / (stddev + eps)
};

// Group-normalized advantages. Singleton and constant groups come out all
// zero. Throws on an empty group.
AdvantageGroup group_advantages(std::span<const double> rewards,
                                double eps = 1e-6);

struct TrainingBatchManifest {
  int iteration = 0;
  Role role = Role::kSolver;
  int group_size = 5;
  double learning_rate = 1e-6;
  double kl_coefficient = 0.01;
  int records = 0;
};

struct BatchRolloutInput {
  std::string text;
  double reward = 0.0;
};

struct BatchRecordInput {
  std::string unit_id;
  std::string prompt;
  std::string video_uri;
  std::vector<BatchRolloutInput> rollouts;
};

struct BatchRollout {
  std::string text;
  double reward = 0.0;
  double advantage = 0.0;
};

struct BatchRecord {
  std::string unit_id;
  std::string prompt;
  std::string video_uri;
  std::vector<BatchRollout> rollouts;
  double group_mean = 0.0;
  double group_std = 0.0;
  double group_eps = 0.0;
};

struct EmitStats {
  int written = 0;
  int skipped_incomplete = 0;
};

// One JSON-Lines file: a {"manifest": ...} header, then one record per line
// ordered by unit_id. Records whose rollout group is not exactly group_size
// are skipped and counted. manifest.records in the header reflects what was
// written.
EmitStats emit_training_batch(const std::filesystem::path& path,
                              TrainingBatchManifest manifest,
                              std::vector<BatchRecordInput> records,
                              double eps);

struct ParsedBatch {
  TrainingBatchManifest manifest;
  std::vector<BatchRecord> records;
};

ParsedBatch read_training_batch(const std::filesystem::path& path);

}  // namespace evz
