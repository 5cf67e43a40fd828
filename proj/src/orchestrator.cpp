#include "orchestrator.hpp"

#include <fcntl.h>
#include <signal.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "json.hpp"
#include "util.hpp"

namespace evz {

namespace {

using Json = nlohmann::ordered_json;

}  // namespace

const char* to_string(Phase phase) {
  switch (phase) {
    case Phase::kQuestionerOpt: return "questioner-opt";
    case Phase::kDataGen: return "data-gen";
    case Phase::kPseudoLabel: return "pseudo-label";
    case Phase::kSolverScore: return "solver-score";
    case Phase::kBatchEmit: return "batch-emit";
    case Phase::kDone: return "done";
  }
  return "done";
}

std::optional<Phase> phase_from_string(std::string_view s) {
  for (Phase p : {Phase::kQuestionerOpt, Phase::kDataGen, Phase::kPseudoLabel,
                  Phase::kSolverScore, Phase::kBatchEmit, Phase::kDone}) {
    if (s == to_string(p)) return p;
  }
  return std::nullopt;
}

std::string state_to_json(const IterationState& state) {
  Json j;
  j["iteration"] = state.iteration;
  j["phase"] = to_string(state.phase);
  j["questioner_ref"] = state.questioner_ref;
  j["solver_ref"] = state.solver_ref;
  j["dataset_path"] = state.dataset_path;
  j["rng_seed"] = state.rng_seed;
  return j.dump(2);
}

IterationState state_from_json(const std::string& text) {
  Json j = Json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw Error(ErrorCode::kState, "state file is not valid JSON");
  }
  IterationState s;
  try {
    s.iteration = j.at("iteration").get<int>();
    const auto phase = phase_from_string(j.at("phase").get<std::string>());
    if (!phase) throw Error(ErrorCode::kState, "state has unknown phase");
    s.phase = *phase;
    s.questioner_ref = j.at("questioner_ref").get<std::string>();
    s.solver_ref = j.at("solver_ref").get<std::string>();
    s.dataset_path = j.at("dataset_path").get<std::string>();
    s.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kState,
                std::string("state file is corrupted: ") + e.what());
  }
  return s;
}

void persist_state(const std::filesystem::path& path,
                   const IterationState& state) {
  write_text_file_atomic(path, state_to_json(state) + "\n");
}

IterationState load_state(const std::filesystem::path& path) {
  return state_from_json(read_text_file(path));
}

namespace seeds {

std::uint64_t shuffle(std::uint64_t master, int produced_iter) {
  return mix_seed(master, {"iter" + std::to_string(produced_iter), "shuffle"});
}

std::uint64_t questioner_opt(std::uint64_t master, int produced_iter,
                             const std::string& video_id) {
  return mix_seed(master,
                  {"iter" + std::to_string(produced_iter), "qopt", video_id});
}

std::uint64_t data_gen(std::uint64_t master, int produced_iter,
                       const std::string& video_id) {
  return mix_seed(master,
                  {"iter" + std::to_string(produced_iter), "datagen", video_id});
}

std::uint64_t rollout(std::uint64_t master, int produced_iter,
                      const std::string& unit_id, bool with_video) {
  return mix_seed(master, {"iter" + std::to_string(produced_iter),
                           with_video ? "roll-with" : "roll-without", unit_id});
}

std::uint64_t pseudo(std::uint64_t master, int produced_iter,
                     const std::string& unit_id) {
  return mix_seed(master,
                  {"iter" + std::to_string(produced_iter), "roll-pseudo",
                   unit_id});
}

}  // namespace seeds

std::string qopt_unit_id(const std::string& video_id, int produced_iter,
                         int candidate_index) {
  return video_id + "/q" + std::to_string(produced_iter) + "-" +
         std::to_string(candidate_index);
}

std::string datagen_unit_id(const std::string& video_id, int produced_iter,
                            int candidate_index) {
  return video_id + "/d" + std::to_string(produced_iter) + "-" +
         std::to_string(candidate_index);
}

std::vector<VideoContext> load_video_manifest(
    const std::filesystem::path& path, int* skipped) {
  const std::string content = read_text_file(path);
  std::istringstream in(content);
  std::vector<VideoContext> videos;
  int skipped_count = 0;
  int line_no = 0;
  std::string line;
  auto skip = [&](const char* why) {
    ++skipped_count;
    std::fprintf(stderr, "warning: skipping manifest row %d in %s (%s)\n",
                 line_no, path.c_str(), why);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("id") ||
        !j.contains("uri") || !j.contains("duration_s") ||
        !j["duration_s"].is_number()) {
      skip("missing id/uri/duration_s");
      continue;
    }
    VideoContext v;
    v.id = j["id"].get<std::string>();
    v.uri = j["uri"].get<std::string>();
    v.duration_s = j["duration_s"].get<double>();
    if (!v.valid()) {
      skip("duration_s must be positive");
      continue;
    }
    videos.push_back(std::move(v));
  }
  if (skipped) *skipped = skipped_count;
  return videos;
}

OutputLock::OutputLock(std::filesystem::path path) : path_(std::move(path)) {}

OutputLock OutputLock::acquire(const std::filesystem::path& dir) {
  const std::filesystem::path path = dir / ".lock";
  for (int attempt = 0; attempt < 2; ++attempt) {
    const int fd =
        ::open(path.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd >= 0) {
      const std::string pid = std::to_string(::getpid());
      (void)!::write(fd, pid.c_str(), pid.size());
      ::close(fd);
      OutputLock lock(path);
      lock.owned_ = true;
      return lock;
    }
    // Lock exists; take it over only when the recorded pid is gone.
    std::string holder;
    try {
      holder = trim(read_text_file(path));
    } catch (const Error&) {
      holder.clear();
    }
    const long pid = holder.empty() ? 0 : std::strtol(holder.c_str(), nullptr, 10);
    const bool alive = pid > 0 && (::kill(static_cast<pid_t>(pid), 0) == 0 ||
                                   errno == EPERM);
    if (alive) {
      throw Error(ErrorCode::kLocked,
                  "output directory is locked by pid " + holder + " (" +
                      path.string() + "); remove the lock file if stale");
    }
    std::error_code ec;
    std::filesystem::remove(path, ec);
  }
  throw Error(ErrorCode::kLocked, "could not acquire " + path.string());
}

OutputLock::~OutputLock() {
  if (owned_) {
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }
}

OutputLock::OutputLock(OutputLock&& other) noexcept
    : path_(std::move(other.path_)), owned_(other.owned_) {
  other.owned_ = false;
}

Engine::Engine(EngineConfig config) : config_(std::move(config)) {
  validate_config(config_);
  std::filesystem::create_directories(config_.output_dir);
  lock_.emplace(OutputLock::acquire(config_.output_dir));
  backend_ = make_backend(config_.backend);

  const std::filesystem::path state_path =
      std::filesystem::path(config_.output_dir) / "state.json";
  if (std::filesystem::exists(state_path)) {
    state_ = load_state(state_path);
  } else {
    // Persisted lazily by the first phase so a zero-iteration run leaves no
    // files behind.
    state_.rng_seed = config_.seed;
    state_.phase = Phase::kQuestionerOpt;
  }
}

std::filesystem::path Engine::iteration_dir(int produced) const {
  return std::filesystem::path(config_.output_dir) /
         ("iter" + std::to_string(produced));
}

std::filesystem::path Engine::output_path(const std::string& name) const {
  return iteration_dir(produced_iter()) / name;
}

void Engine::persist() {
  persist_state(std::filesystem::path(config_.output_dir) / "state.json",
                state_);
}

SamplingPolicy Engine::policy() const {
  return {config_.fps, config_.max_frames, config_.backend.temperature};
}

std::vector<VideoContext> Engine::iteration_videos() const {
  std::vector<VideoContext> videos =
      load_video_manifest(config_.video_manifest_path);
  Rng rng(seeds::shuffle(state_.rng_seed, produced_iter()));
  shuffle(videos, rng);
  if (static_cast<int>(videos.size()) > config_.videos_per_iter) {
    videos.resize(static_cast<std::size_t>(config_.videos_per_iter));
  }
  return videos;
}

std::vector<std::vector<std::string>> Engine::run_requests(
    const std::vector<PromptRequest>& requests) {
  return complete_all(*backend_, &cache_, requests,
                      config_.backend.max_parallel);
}

void Engine::read_handback(Role role) {
  const std::filesystem::path path =
      std::filesystem::path(config_.output_dir) / "trainer_handback.json";
  if (!std::filesystem::exists(path)) return;  // role stays frozen
  Json j = Json::parse(read_text_file(path), nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw Error(ErrorCode::kParse, "trainer_handback.json is not valid JSON");
  }
  const char* key = role == Role::kQuestioner ? "questioner" : "solver";
  if (j.contains(key) && j[key].is_string()) {
    if (role == Role::kQuestioner) {
      state_.questioner_ref = j[key].get<std::string>();
    } else {
      state_.solver_ref = j[key].get<std::string>();
    }
  }
}

QuestionerScore Engine::score_candidate(
    const SupervisionUnit& unit, const std::vector<RolloutResponse>& with,
    const std::vector<RolloutResponse>& without,
    const FormatVerdict& verdict) const {
  std::optional<LearnabilityResult> learn;
  std::optional<DependencyResult> dep;
  std::optional<EvidenceScore> evid;
  if (verdict.ok) {
    auto labels = [](const std::vector<RolloutResponse>& rollouts) {
      std::vector<std::optional<OptionLabel>> out;
      out.reserve(rollouts.size());
      for (const RolloutResponse& r : rollouts) {
        out.push_back(r.valid ? r.answer : std::nullopt);
      }
      return out;
    };
    const auto with_labels = labels(with);
    const auto without_labels = labels(without);
    try {
      learn = learnability(with_labels);
    } catch (const Error&) {
      learn.reset();  // no valid rollouts: utility term stays zero
    }
    try {
      dep = video_dependency(with_labels, without_labels, unit.answer);
    } catch (const Error&) {
      dep.reset();
    }
    evid = evidence_quality(unit, config_.heuristics);
  }
  return questioner_reward(verdict, learn, dep, evid, config_.heuristics);
}

namespace {

struct Candidate {
  std::string unit_id;
  VideoContext video;
  std::string raw;
  FormatVerdict verdict;
  std::optional<SupervisionUnit> unit;
};

Json candidate_to_json(const Candidate& c) {
  Json j;
  j["unit_id"] = c.unit_id;
  j["video"]["id"] = c.video.id;
  j["video"]["uri"] = c.video.uri;
  j["video"]["duration_s"] = c.video.duration_s;
  j["raw"] = c.raw;
  j["ok"] = c.verdict.ok;
  j["reason"] = c.verdict.ok ? Json(nullptr)
                             : Json(std::string(to_string(*c.verdict.reason)));
  if (c.unit) {
    Json unit = Json::parse(serialize_unit(*c.unit));
    j["unit"] = std::move(unit);
  } else {
    j["unit"] = nullptr;
  }
  return j;
}

Candidate candidate_from_json(const Json& j) {
  Candidate c;
  c.unit_id = j.at("unit_id").get<std::string>();
  c.video.id = j.at("video").at("id").get<std::string>();
  c.video.uri = j.at("video").at("uri").get<std::string>();
  c.video.duration_s = j.at("video").at("duration_s").get<double>();
  c.raw = j.at("raw").get<std::string>();
  if (j.at("ok").get<bool>()) {
    c.verdict = FormatVerdict::pass();
    auto parsed = parse_questioner_output(j.at("unit").dump(), c.video);
    if (!parsed.unit) {
      throw Error(ErrorCode::kParse,
                  "candidates file holds an unparsable unit: " + c.unit_id);
    }
    parsed.unit->unit_id = c.unit_id;
    c.unit = std::move(parsed.unit);
  } else {
    const auto reason =
        format_failure_from_string(j.at("reason").get<std::string>());
    if (!reason) {
      throw Error(ErrorCode::kParse, "candidates file has a bad verdict");
    }
    c.verdict = FormatVerdict::fail(*reason);
  }
  return c;
}

}  // namespace

void Engine::phase_questioner_opt() {
  const int P = produced_iter();
  const auto videos = iteration_videos();
  std::filesystem::create_directories(iteration_dir(P));

  std::vector<PromptRequest> prompts;
  prompts.reserve(videos.size());
  for (const VideoContext& v : videos) {
    prompts.push_back(build_questioner_prompt(
        v, policy(), config_.group_size_questioner,
        seeds::questioner_opt(state_.rng_seed, P, v.id)));
  }
  const auto candidate_texts = run_requests(prompts);

  // Parse all candidates, then fetch solver rollouts for the valid ones.
  std::vector<std::vector<Candidate>> per_video(videos.size());
  std::vector<PromptRequest> rollout_requests;
  struct RolloutSlot {
    std::size_t video_index;
    std::size_t candidate_index;
    bool with_video;
  };
  std::vector<RolloutSlot> slots;
  for (std::size_t vi = 0; vi < videos.size(); ++vi) {
    for (std::size_t k = 0; k < candidate_texts[vi].size(); ++k) {
      Candidate c;
      c.video = videos[vi];
      c.raw = candidate_texts[vi][k];
      c.unit_id = qopt_unit_id(videos[vi].id, P, static_cast<int>(k));
      auto parsed = parse_questioner_output(c.raw, videos[vi]);
      c.verdict = parsed.verdict;
      if (parsed.unit) {
        parsed.unit->unit_id = c.unit_id;
        c.unit = std::move(parsed.unit);
        for (bool with_video : {true, false}) {
          rollout_requests.push_back(build_solver_prompt(
              *c.unit, with_video, policy(), config_.m_rollouts,
              seeds::rollout(state_.rng_seed, P, c.unit_id, with_video)));
          slots.push_back({vi, k, with_video});
        }
      }
      per_video[vi].push_back(std::move(c));
    }
  }
  const auto rollout_texts = run_requests(rollout_requests);

  std::vector<std::vector<std::vector<RolloutResponse>>> with_rollouts(
      videos.size());
  std::vector<std::vector<std::vector<RolloutResponse>>> without_rollouts(
      videos.size());
  for (std::size_t vi = 0; vi < videos.size(); ++vi) {
    with_rollouts[vi].resize(per_video[vi].size());
    without_rollouts[vi].resize(per_video[vi].size());
  }
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const RolloutSlot& slot = slots[i];
    std::vector<RolloutResponse> parsed;
    parsed.reserve(rollout_texts[i].size());
    for (const std::string& text : rollout_texts[i]) {
      parsed.push_back(
          parse_solver_output(text, videos[slot.video_index]));
    }
    auto& dest = slot.with_video ? with_rollouts : without_rollouts;
    dest[slot.video_index][slot.candidate_index] = std::move(parsed);
  }

  std::vector<BatchRecordInput> records;
  records.reserve(videos.size());
  for (std::size_t vi = 0; vi < videos.size(); ++vi) {
    BatchRecordInput rec;
    rec.unit_id = videos[vi].id + "/q" + std::to_string(P);
    rec.prompt = prompts[vi].body;
    rec.video_uri = videos[vi].uri;
    for (std::size_t k = 0; k < per_video[vi].size(); ++k) {
      const Candidate& c = per_video[vi][k];
      const QuestionerScore score =
          c.unit ? score_candidate(*c.unit, with_rollouts[vi][k],
                                   without_rollouts[vi][k], c.verdict)
                 : score_candidate(SupervisionUnit{}, {}, {}, c.verdict);
      rec.rollouts.push_back({c.raw, score.r_q_total});
    }
    records.push_back(std::move(rec));
  }

  TrainingBatchManifest manifest;
  manifest.iteration = P;
  manifest.role = Role::kQuestioner;
  manifest.group_size = config_.group_size_questioner;
  manifest.learning_rate = config_.learning_rate;
  manifest.kl_coefficient = config_.kl_coefficient;
  emit_training_batch(output_path("questioner_batch.jsonl"), manifest,
                      std::move(records), config_.advantage_eps);
  read_handback(Role::kQuestioner);

  state_.phase = Phase::kDataGen;
  persist();
}

void Engine::phase_data_gen() {
  const int P = produced_iter();
  const auto videos = iteration_videos();
  std::filesystem::create_directories(iteration_dir(P));

  std::vector<PromptRequest> prompts;
  prompts.reserve(videos.size());
  for (const VideoContext& v : videos) {
    prompts.push_back(
        build_questioner_prompt(v, policy(), config_.units_per_video,
                                seeds::data_gen(state_.rng_seed, P, v.id)));
  }
  const auto texts = run_requests(prompts);

  std::string lines;
  for (std::size_t vi = 0; vi < videos.size(); ++vi) {
    for (std::size_t j = 0; j < texts[vi].size(); ++j) {
      Candidate c;
      c.video = videos[vi];
      c.raw = texts[vi][j];
      c.unit_id = datagen_unit_id(videos[vi].id, P, static_cast<int>(j));
      auto parsed = parse_questioner_output(c.raw, videos[vi]);
      c.verdict = parsed.verdict;
      if (parsed.unit) {
        parsed.unit->unit_id = c.unit_id;
        c.unit = std::move(parsed.unit);
      }
      lines += candidate_to_json(c).dump();
      lines += '\n';
    }
  }
  write_text_file_atomic(output_path("candidates.jsonl"), lines);

  state_.phase = Phase::kPseudoLabel;
  persist();
}

void Engine::phase_pseudo_label() {
  const int P = produced_iter();
  const std::string content =
      read_text_file(output_path("candidates.jsonl"));
  std::istringstream in(content);
  std::vector<Candidate> candidates;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    candidates.push_back(candidate_from_json(Json::parse(line)));
  }

  // Rollouts: with-video serves learnability and pseudo-labeling through the
  // shared cache unless fresh_pseudo_rollouts forces a separate stream.
  const int with_samples = std::max(config_.m_rollouts, config_.n_pseudo);
  std::vector<PromptRequest> requests;
  struct Slot {
    std::size_t candidate;
    int kind;  // 0 with, 1 without, 2 pseudo
  };
  std::vector<Slot> slots;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const Candidate& c = candidates[i];
    if (!c.unit) continue;
    requests.push_back(build_solver_prompt(
        *c.unit, true, policy(),
        config_.fresh_pseudo_rollouts ? config_.m_rollouts : with_samples,
        seeds::rollout(state_.rng_seed, P, c.unit_id, true)));
    slots.push_back({i, 0});
    requests.push_back(build_solver_prompt(
        *c.unit, false, policy(), config_.m_rollouts,
        seeds::rollout(state_.rng_seed, P, c.unit_id, false)));
    slots.push_back({i, 1});
    if (config_.fresh_pseudo_rollouts) {
      PromptRequest fresh = build_solver_prompt(
          *c.unit, true, policy(), config_.n_pseudo,
          seeds::pseudo(state_.rng_seed, P, c.unit_id));
      requests.push_back(std::move(fresh));
      slots.push_back({i, 2});
    }
  }
  const auto responses = run_requests(requests);

  std::vector<std::vector<RolloutResponse>> with_rollouts(candidates.size());
  std::vector<std::vector<RolloutResponse>> without_rollouts(candidates.size());
  std::vector<std::vector<RolloutResponse>> pseudo_rollouts(candidates.size());
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const Candidate& c = candidates[slots[i].candidate];
    std::vector<RolloutResponse> parsed;
    parsed.reserve(responses[i].size());
    for (const std::string& text : responses[i]) {
      parsed.push_back(parse_solver_output(text, c.video));
    }
    if (slots[i].kind == 0) {
      with_rollouts[slots[i].candidate] = std::move(parsed);
    } else if (slots[i].kind == 1) {
      without_rollouts[slots[i].candidate] = std::move(parsed);
    } else {
      pseudo_rollouts[slots[i].candidate] = std::move(parsed);
    }
  }

  std::vector<DatasetBuildInput> inputs;
  int dropped_format = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const Candidate& c = candidates[i];
    if (!c.unit) {
      ++dropped_format;
      continue;
    }
    DatasetBuildInput input;
    input.unit = *c.unit;
    input.verdict = c.verdict;
    input.iteration = P;

    std::vector<RolloutResponse> learn_rollouts = with_rollouts[i];
    if (static_cast<int>(learn_rollouts.size()) > config_.m_rollouts) {
      learn_rollouts.resize(static_cast<std::size_t>(config_.m_rollouts));
    }
    input.scores = score_candidate(*c.unit, learn_rollouts,
                                   without_rollouts[i], c.verdict);

    std::vector<RolloutResponse> label_rollouts =
        config_.fresh_pseudo_rollouts ? pseudo_rollouts[i] : with_rollouts[i];
    if (static_cast<int>(label_rollouts.size()) > config_.n_pseudo) {
      label_rollouts.resize(static_cast<std::size_t>(config_.n_pseudo));
    }
    input.rollouts = std::move(label_rollouts);
    inputs.push_back(std::move(input));
  }

  BuildReport build_report;
  const auto records = build_dataset(inputs, config_.gate, &build_report);
  const std::filesystem::path dataset_path = output_path("dataset.jsonl");
  write_dataset_jsonl(dataset_path, records);

  Json report;
  report["iteration"] = P;
  report["generated"] = static_cast<int>(candidates.size());
  report["dropped_format"] = dropped_format;
  report["dropped_no_label"] = build_report.dropped_no_label;
  report["dropped_gate"] = build_report.dropped_gate;
  report["retained"] = build_report.retained;
  write_text_file_atomic(output_path("report.json"), report.dump(2) + "\n");

  state_.dataset_path = dataset_path.string();
  state_.phase = Phase::kSolverScore;
  persist();
}

void Engine::phase_solver_score() {
  const int P = produced_iter();
  const auto records = read_dataset_jsonl(state_.dataset_path);

  std::vector<PromptRequest> requests;
  requests.reserve(records.size());
  for (const DatasetRecord& r : records) {
    requests.push_back(build_solver_prompt(
        r.unit, true, policy(), config_.group_size_solver,
        seeds::rollout(state_.rng_seed, P, r.unit.unit_id, true)));
  }
  const auto responses = run_requests(requests);

  std::string lines;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const DatasetRecord& r = records[i];
    Json j;
    j["unit_id"] = r.unit.unit_id;
    j["prompt"] = requests[i].body;
    j["video_uri"] = r.unit.video.uri;
    Json rollouts = Json::array();
    for (const std::string& text : responses[i]) {
      const RolloutResponse pred = parse_solver_output(text, r.unit.video);
      const SolverScore score =
          solver_reward(pred, r.pseudo, r.unit.video.duration_s, config_.alpha);
      Json entry;
      entry["text"] = text;
      entry["reward"] = score.r_s;
      rollouts.push_back(std::move(entry));
    }
    j["rollouts"] = std::move(rollouts);
    lines += j.dump();
    lines += '\n';
  }
  write_text_file_atomic(output_path("solver_scores.jsonl"), lines);

  state_.phase = Phase::kBatchEmit;
  persist();
}

void Engine::phase_batch_emit() {
  const int P = produced_iter();
  const std::string content =
      read_text_file(output_path("solver_scores.jsonl"));
  std::istringstream in(content);
  std::vector<BatchRecordInput> records;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    Json j = Json::parse(line);
    BatchRecordInput rec;
    rec.unit_id = j.at("unit_id").get<std::string>();
    rec.prompt = j.at("prompt").get<std::string>();
    rec.video_uri = j.at("video_uri").get<std::string>();
    for (const Json& r : j.at("rollouts")) {
      rec.rollouts.push_back(
          {r.at("text").get<std::string>(), r.at("reward").get<double>()});
    }
    records.push_back(std::move(rec));
  }

  TrainingBatchManifest manifest;
  manifest.iteration = P;
  manifest.role = Role::kSolver;
  manifest.group_size = config_.group_size_solver;
  manifest.learning_rate = config_.learning_rate;
  manifest.kl_coefficient = config_.kl_coefficient;
  emit_training_batch(output_path("solver_batch.jsonl"), manifest,
                      std::move(records), config_.advantage_eps);
  read_handback(Role::kSolver);

  state_.iteration = P;
  state_.phase = Phase::kDone;
  cache_.clear();  // rollout reuse is scoped to one iteration
  persist();
}

void Engine::run_phase() {
  if (state_.phase == Phase::kDone) {
    state_.phase = Phase::kQuestionerOpt;
    persist();
  }
  switch (state_.phase) {
    case Phase::kQuestionerOpt: phase_questioner_opt(); break;
    case Phase::kDataGen: phase_data_gen(); break;
    case Phase::kPseudoLabel: phase_pseudo_label(); break;
    case Phase::kSolverScore: phase_solver_score(); break;
    case Phase::kBatchEmit: phase_batch_emit(); break;
    case Phase::kDone: break;
  }
}

void Engine::run(int total_iterations, std::optional<Phase> stop_after) {
  while (state_.iteration < total_iterations) {
    const Phase executing =
        state_.phase == Phase::kDone ? Phase::kQuestionerOpt : state_.phase;
    run_phase();
    if (stop_after && executing == *stop_after) return;
  }
}

void Engine::run_named_phase(std::string_view name) {
  const auto requested = phase_from_string(name);
  if (!requested || *requested == Phase::kDone) {
    throw Error(ErrorCode::kInvalidArgument,
                "unknown phase: " + std::string(name));
  }
  const Phase current =
      state_.phase == Phase::kDone ? Phase::kQuestionerOpt : state_.phase;
  if (current != *requested) {
    throw Error(ErrorCode::kState,
                std::string("engine is at phase '") + to_string(state_.phase) +
                    "' of iteration " + std::to_string(state_.iteration + 1) +
                    "; requested '" + std::string(name) + "'");
  }
  run_phase();
}

}  // namespace evz
