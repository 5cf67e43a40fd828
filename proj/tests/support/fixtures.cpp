#include "support/fixtures.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cstdio>

#include "json.hpp"
#include "util.hpp"

namespace evz::test {

namespace {

using Json = nlohmann::ordered_json;

}  // namespace

std::filesystem::path make_temp_dir(const std::string& tag) {
  static std::atomic<int> counter{0};
  const auto base = std::filesystem::temp_directory_path();
  const auto dir = base / ("evicoevo_" + tag + "_" +
                           std::to_string(::getpid()) + "_" +
                           std::to_string(counter.fetch_add(1)));
  std::filesystem::create_directories(dir);
  return dir;
}

VideoContext make_video(const std::string& id, double duration_s) {
  return {id, "file:///videos/" + id + ".mp4", duration_s};
}

SupervisionUnit make_unit(const VideoContext& video, const std::string& unit_id,
                          const std::string& question, OptionLabel answer) {
  SupervisionUnit unit;
  unit.unit_id = unit_id;
  unit.video = video;
  unit.evidence = {
      {*TimeSpan::make(2.0, 6.0), "the player kicks the ball, then falls"}};
  unit.question = question;
  unit.options = {"a goal", "a save", "a foul", "a corner"};
  unit.answer = answer;
  return unit;
}

std::string solver_text(std::optional<char> answer,
                        std::optional<std::pair<double, double>> span) {
  if (!answer) return "I am not sure what happens here.";
  std::string out = "<answer>";
  out += *answer;
  out += "</answer>";
  if (span) {
    out += "<span>" + format_seconds(span->first) + "," +
           format_seconds(span->second) + "</span>";
  }
  return out;
}

void ScriptWriter::add(const PromptRequest& request,
                       const std::vector<std::string>& responses) {
  Json j;
  j["fingerprint"] = fingerprint(request);
  j["responses"] = responses;
  lines_ += j.dump();
  lines_ += '\n';
}

void ScriptWriter::write(const std::filesystem::path& path) const {
  write_text_file_atomic(path, lines_);
}

namespace {

// With-video rollout scripts per data-gen candidate, by video index:
//   0: 6 correct with spans + 4 wrong        -> support 0.6, consensus span
//   1: 9 correct + 1 wrong                   -> support 0.9, gated out
//   2: 4 correct without spans + 6 garbage   -> support 0.4, fallback span
std::vector<std::string> datagen_with_rollouts(std::size_t video_index) {
  switch (video_index) {
    case 0:
      return {solver_text('B', {{4.0, 8.0}}), solver_text('A', {{0.0, 2.0}}),
              solver_text('B', {{5.0, 9.0}}), solver_text('B', {{4.0, 7.0}}),
              solver_text('A', std::nullopt),  solver_text('B', {{3.0, 8.0}}),
              solver_text('A', {{1.0, 2.0}}),  solver_text('B', {{5.0, 8.0}}),
              solver_text('B', {{4.0, 9.0}}),  solver_text('A', std::nullopt)};
    case 1: {
      std::vector<std::string> out(9, solver_text('B', {{4.0, 8.0}}));
      out.push_back(solver_text('C', std::nullopt));
      return out;
    }
    default:
      return {solver_text('B', std::nullopt), solver_text(std::nullopt, {}),
              solver_text('B', std::nullopt), solver_text(std::nullopt, {}),
              solver_text(std::nullopt, {}),  solver_text('B', std::nullopt),
              solver_text(std::nullopt, {}),  solver_text(std::nullopt, {}),
              solver_text('B', std::nullopt), solver_text(std::nullopt, {})};
  }
}

// Mixed consistency for questioner-opt candidates: 6/10 agree with B.
std::vector<std::string> qopt_with_rollouts() {
  return {solver_text('B', {{4.0, 8.0}}), solver_text('A', std::nullopt),
          solver_text('B', {{5.0, 9.0}}), solver_text('B', {{4.0, 7.0}}),
          solver_text('A', std::nullopt), solver_text('B', {{3.0, 8.0}}),
          solver_text('A', std::nullopt), solver_text('B', {{5.0, 8.0}}),
          solver_text('B', {{4.0, 9.0}}), solver_text('A', std::nullopt)};
}

// Weak without-video agreement: 1/10 matches B.
std::vector<std::string> without_rollouts() {
  std::vector<std::string> out(9, solver_text('C', std::nullopt));
  out.insert(out.begin(), solver_text('B', std::nullopt));
  return out;
}

}  // namespace

PipelineFixture build_pipeline_fixture(const std::filesystem::path& dir,
                                       std::uint64_t seed,
                                       const EngineConfig& config) {
  PipelineFixture fixture;
  fixture.videos = {make_video("vid0", 10.0), make_video("vid1", 20.0),
                    make_video("vid2", 30.0)};

  std::string manifest;
  for (const VideoContext& v : fixture.videos) {
    Json row;
    row["id"] = v.id;
    row["uri"] = v.uri;
    row["duration_s"] = v.duration_s;
    manifest += row.dump();
    manifest += '\n';
  }
  fixture.manifest_path = dir / "manifest.jsonl";
  write_text_file_atomic(fixture.manifest_path, manifest);

  const SamplingPolicy policy{config.fps, config.max_frames,
                              config.backend.temperature};
  const int P = 1;  // fixtures cover the first iteration
  const int with_samples = std::max(config.m_rollouts, config.n_pseudo);

  ScriptWriter script;
  for (std::size_t vi = 0; vi < fixture.videos.size(); ++vi) {
    const VideoContext& video = fixture.videos[vi];

    // Questioner-opt prompt: three parsable candidates plus one malformed.
    std::vector<std::string> candidates;
    std::vector<SupervisionUnit> qopt_units;
    for (int k = 0; k < 3; ++k) {
      SupervisionUnit unit =
          make_unit(video, qopt_unit_id(video.id, P, k),
                    "What happens right after the kick in clip " +
                        std::to_string(k) + " of " + video.id + "?");
      candidates.push_back(serialize_unit(unit));
      qopt_units.push_back(std::move(unit));
    }
    candidates.push_back("{\"question\": \"missing everything else\"}");
    script.add(build_questioner_prompt(
                   video, policy, config.group_size_questioner,
                   seeds::questioner_opt(seed, P, video.id)),
               candidates);

    for (const SupervisionUnit& unit : qopt_units) {
      script.add(build_solver_prompt(
                     unit, true, policy, config.m_rollouts,
                     seeds::rollout(seed, P, unit.unit_id, true)),
                 qopt_with_rollouts());
      script.add(build_solver_prompt(
                     unit, false, policy, config.m_rollouts,
                     seeds::rollout(seed, P, unit.unit_id, false)),
                 without_rollouts());
    }

    // Data-gen candidate and its rollouts.
    SupervisionUnit dg_unit =
        make_unit(video, datagen_unit_id(video.id, P, 0),
                  "Which event does the highlighted span of " + video.id +
                      " show?");
    script.add(build_questioner_prompt(video, policy, config.units_per_video,
                                       seeds::data_gen(seed, P, video.id)),
               {serialize_unit(dg_unit)});
    script.add(build_solver_prompt(dg_unit, true, policy, with_samples,
                                   seeds::rollout(seed, P, dg_unit.unit_id,
                                                  true)),
               datagen_with_rollouts(vi));
    script.add(build_solver_prompt(dg_unit, false, policy, config.m_rollouts,
                                   seeds::rollout(seed, P, dg_unit.unit_id,
                                                  false)),
               without_rollouts());
  }

  fixture.script_path = dir / "script.jsonl";
  script.write(fixture.script_path);
  return fixture;
}

EngineConfig fixture_config(const PipelineFixture& fixture,
                            const std::filesystem::path& output_dir,
                            std::uint64_t seed) {
  EngineConfig config;
  config.video_manifest_path = fixture.manifest_path.string();
  config.iterations = 1;
  config.videos_per_iter = 3;
  config.seed = seed;
  config.output_dir = output_dir.string();
  config.backend.kind = BackendConfig::Kind::kScripted;
  config.backend.script_path = fixture.script_path.string();
  config.backend.max_parallel = 2;
  return config;
}

int run_command(const std::string& command, std::string* output) {
  FILE* pipe = ::popen((command + " 2>&1").c_str(), "r");
  if (!pipe) return -1;
  std::string captured;
  char buffer[4096];
  while (std::size_t n = ::fread(buffer, 1, sizeof(buffer), pipe)) {
    captured.append(buffer, n);
  }
  const int status = ::pclose(pipe);
  if (output) *output = captured;
  return WEXITSTATUS(status);
}

std::uint64_t hash_file(const std::filesystem::path& path) {
  return fnv1a64(read_text_file(path));
}

}  // namespace evz::test
