#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "backend.hpp"
#include "pseudo_supervision.hpp"
#include "questioner_rewards.hpp"

namespace evz {

struct EngineConfig {
  // [engine]
  std::string video_manifest_path;
  int iterations = 5;
  int videos_per_iter = 600;
  int m_rollouts = 10;
  int n_pseudo = 10;
  CurriculumGate gate;  // [0.3, 0.8]
  double alpha = 0.5;
  double fps = 2.0;
  int max_frames = 32;
  int units_per_video = 1;
  int group_size_questioner = 4;
  int group_size_solver = 5;
  double learning_rate = 1e-6;
  double kl_coefficient = 0.01;
  double advantage_eps = 1e-6;
  bool fresh_pseudo_rollouts = false;
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  // [backend]
  BackendConfig backend;
  // [heuristics]
  EvidenceHeuristics heuristics = EvidenceHeuristics::defaults();
};

// Flat key=value file with [engine], [backend], and [heuristics] sections;
// '#' and ';' start comments. Unknown keys are errors.
EngineConfig load_config(const std::filesystem::path& path);

// "section.key=value"; bare keys default to the engine section.
void apply_override(EngineConfig& config, std::string_view assignment);

std::string dump_config(const EngineConfig& config);

// Checks counts, gate ordering, and per-kind backend requirements.
void validate_config(const EngineConfig& config);

}  // namespace evz
