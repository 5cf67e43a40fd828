#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "backend.hpp"
#include "config.hpp"
#include "pseudo_supervision.hpp"
#include "solver_training.hpp"

namespace evz {

enum class Phase {
  kQuestionerOpt,
  kDataGen,
  kPseudoLabel,
  kSolverScore,
  kBatchEmit,
  kDone,
};

const char* to_string(Phase phase);
std::optional<Phase> phase_from_string(std::string_view s);

// iteration counts completed iterations; phase tracks progress of iteration
// iteration+1 (kDone = nothing in flight).
struct IterationState {
  int iteration = 0;
  std::string questioner_ref = "base";
  std::string solver_ref = "base";
  std::string dataset_path;
  std::uint64_t rng_seed = 0;
  Phase phase = Phase::kQuestionerOpt;
};

std::string state_to_json(const IterationState& state);
IterationState state_from_json(const std::string& text);

void persist_state(const std::filesystem::path& path,
                   const IterationState& state);
IterationState load_state(const std::filesystem::path& path);

// Seed streams shared between the engine and scripted-backend fixtures.
// produced_iter is the 1-based index of the iteration being produced.
namespace seeds {
std::uint64_t shuffle(std::uint64_t master, int produced_iter);
std::uint64_t questioner_opt(std::uint64_t master, int produced_iter,
                             const std::string& video_id);
std::uint64_t data_gen(std::uint64_t master, int produced_iter,
                       const std::string& video_id);
std::uint64_t rollout(std::uint64_t master, int produced_iter,
                      const std::string& unit_id, bool with_video);
std::uint64_t pseudo(std::uint64_t master, int produced_iter,
                     const std::string& unit_id);
}  // namespace seeds

std::string qopt_unit_id(const std::string& video_id, int produced_iter,
                         int candidate_index);
std::string datagen_unit_id(const std::string& video_id, int produced_iter,
                            int candidate_index);

// JSON-Lines {"id","uri","duration_s"}; rows without a positive duration are
// skipped (counted in *skipped). An unreadable file throws.
std::vector<VideoContext> load_video_manifest(const std::filesystem::path& path,
                                              int* skipped = nullptr);

// Exclusive ownership of an output directory via {dir}/.lock holding the
// owner pid; a lock whose pid is no longer alive is taken over.
class OutputLock {
 public:
  static OutputLock acquire(const std::filesystem::path& dir);
  ~OutputLock();
  OutputLock(OutputLock&& other) noexcept;
  OutputLock& operator=(OutputLock&&) = delete;
  OutputLock(const OutputLock&) = delete;

 private:
  explicit OutputLock(std::filesystem::path path);
  std::filesystem::path path_;
  bool owned_ = false;
};

// Drives S_t -> Q_{t+1} -> D_{t+1} -> S_{t+1}. Each phase reads its inputs
// from disk (or the backend) and writes one atomic output, so a run can be
// resumed at any recorded phase.
class Engine {
 public:
  explicit Engine(EngineConfig config);

  const IterationState& state() const { return state_; }
  const EngineConfig& config() const { return config_; }

  // Executes the current phase (starting a new iteration when state is done)
  // and persists the advanced state.
  void run_phase();

  // Runs until total_iterations have completed, optionally stopping right
  // after the named phase finishes. total_iterations <= 0 is a no-op.
  void run(int total_iterations, std::optional<Phase> stop_after = std::nullopt);

  // CLI single-phase entry; the requested phase must match the state.
  void run_named_phase(std::string_view name);

  std::filesystem::path iteration_dir(int produced_iter) const;

 private:
  int produced_iter() const { return state_.iteration + 1; }
  std::filesystem::path output_path(const std::string& name) const;
  void persist();
  std::vector<VideoContext> iteration_videos() const;
  std::vector<std::vector<std::string>> run_requests(
      const std::vector<PromptRequest>& requests);
  SamplingPolicy policy() const;
  void read_handback(Role role);

  struct ScoredCandidate;
  QuestionerScore score_candidate(const SupervisionUnit& unit,
                                  const std::vector<RolloutResponse>& with,
                                  const std::vector<RolloutResponse>& without,
                                  const FormatVerdict& verdict) const;

  void phase_questioner_opt();
  void phase_data_gen();
  void phase_pseudo_label();
  void phase_solver_score();
  void phase_batch_emit();

  EngineConfig config_;
  IterationState state_;
  std::unique_ptr<Backend> backend_;
  RolloutCache cache_;
  std::optional<OutputLock> lock_;
};

}  // namespace evz
