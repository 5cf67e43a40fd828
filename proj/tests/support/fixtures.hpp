#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "backend.hpp"
#include "config.hpp"
#include "orchestrator.hpp"
#include "protocol.hpp"

namespace evz::test {

// Fresh unique directory under the system temp dir; removed by the caller.
std::filesystem::path make_temp_dir(const std::string& tag);

struct TempDir {
  explicit TempDir(const std::string& tag) : path(make_temp_dir(tag)) {}
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  std::filesystem::path path;
};

VideoContext make_video(const std::string& id, double duration_s);

SupervisionUnit make_unit(const VideoContext& video, const std::string& unit_id,
                          const std::string& question,
                          OptionLabel answer = OptionLabel::kB);

// "<answer>X</answer><span>s,e</span>" solver reply; label absent produces
// untagged garbage, span absent drops the span tag.
std::string solver_text(std::optional<char> answer,
                        std::optional<std::pair<double, double>> span);

class ScriptWriter {
 public:
  void add(const PromptRequest& request,
           const std::vector<std::string>& responses);
  void write(const std::filesystem::path& path) const;

 private:
  std::string lines_;
};

// A three-video scripted world for full-pipeline runs with iterations=1:
//   - per video, 4 questioner-opt candidates (3 valid, 1 malformed);
//   - per video, 1 data-gen candidate whose rollouts give supports
//     {0.6, 0.9, 0.4}: retained, gated out (too easy), retained via the
//     questioner-fallback span;
//   - every valid unit gets 10 with-video and 10 without-video rollouts.
struct PipelineFixture {
  std::filesystem::path manifest_path;
  std::filesystem::path script_path;
  std::vector<VideoContext> videos;
};

PipelineFixture build_pipeline_fixture(const std::filesystem::path& dir,
                                       std::uint64_t seed,
                                       const EngineConfig& config);

// EngineConfig matching build_pipeline_fixture (3 videos, scripted backend).
EngineConfig fixture_config(const PipelineFixture& fixture,
                            const std::filesystem::path& output_dir,
                            std::uint64_t seed);

// Runs a command line, returns its exit status; stdout/stderr are captured
// into *output when non-null.
int run_command(const std::string& command, std::string* output = nullptr);

std::uint64_t hash_file(const std::filesystem::path& path);

}  // namespace evz::test
