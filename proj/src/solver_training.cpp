#include "solver_training.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"
#include "util.hpp"

namespace evz {

namespace {

using Json = nlohmann::ordered_json;

}  // namespace

SolverScore solver_reward(const RolloutResponse& pred, const PseudoLabel& label,
                          double duration_s, double alpha) {
  if (label.origin == PseudoOrigin::kNone) {
    throw Error(ErrorCode::kInvalidArgument,
                "solver_reward: pseudo label has no supervision span origin");
  }
  if (!(duration_s > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "solver_reward: duration must be positive");
  }
  SolverScore s;
  s.alpha = alpha;
  s.correct = pred.valid && pred.answer && *pred.answer == label.label;
  if (s.correct && pred.span && label.span) {
    s.r_align = alignment_reward(*pred.span, *label.span, duration_s);
  }
  s.r_s = s.correct ? 1.0 + alpha * s.r_align : 0.0;
  return s;
}

AdvantageGroup group_advantages(std::span<const double> rewards, double eps) {
  if (rewards.empty()) {
    throw Error(ErrorCode::kEmptyInput, "group_advantages: empty group");
  }
  AdvantageGroup g;
  g.rewards.assign(rewards.begin(), rewards.end());
  g.eps = eps;
  const double n = static_cast<double>(rewards.size());
  double sum = 0.0;
  for (double r : rewards) sum += r;
  g.mean = sum / n;
  double sq = 0.0;
  for (double r : rewards) sq += (r - g.mean) * (r - g.mean);
  g.stddev = std::sqrt(sq / n);
  g.advantages.reserve(rewards.size());
  const double denom = g.stddev + eps;
  for (double r : rewards) {
    g.advantages.push_back(denom > 0.0 ? (r - g.mean) / denom : 0.0);
  }
  return g;
}

namespace {

Json manifest_to_json(const TrainingBatchManifest& m) {
  Json j;
  j["iteration"] = m.iteration;
  j["role"] = to_string(m.role);
  j["group_size"] = m.group_size;
  j["learning_rate"] = m.learning_rate;
  j["kl_coefficient"] = m.kl_coefficient;
  j["records"] = m.records;
  return j;
}

TrainingBatchManifest manifest_from_json(const Json& j) {
  TrainingBatchManifest m;
  m.iteration = j.at("iteration").get<int>();
  const std::string role = j.at("role").get<std::string>();
  if (role == "questioner") {
    m.role = Role::kQuestioner;
  } else if (role == "solver") {
    m.role = Role::kSolver;
  } else {
    throw Error(ErrorCode::kParse, "batch manifest has unknown role: " + role);
  }
  m.group_size = j.at("group_size").get<int>();
  m.learning_rate = j.at("learning_rate").get<double>();
  m.kl_coefficient = j.at("kl_coefficient").get<double>();
  m.records = j.at("records").get<int>();
  return m;
}

}  // namespace

EmitStats emit_training_batch(const std::filesystem::path& path,
                              TrainingBatchManifest manifest,
                              std::vector<BatchRecordInput> records,
                              double eps) {
  std::sort(records.begin(), records.end(),
            [](const BatchRecordInput& a, const BatchRecordInput& b) {
              return a.unit_id < b.unit_id;
            });

  EmitStats stats;
  std::string body;
  for (const BatchRecordInput& rec : records) {
    if (static_cast<int>(rec.rollouts.size()) != manifest.group_size) {
      ++stats.skipped_incomplete;
      continue;
    }
    std::vector<double> rewards;
    rewards.reserve(rec.rollouts.size());
    for (const BatchRolloutInput& r : rec.rollouts) rewards.push_back(r.reward);
    const AdvantageGroup group = group_advantages(rewards, eps);

    Json j;
    j["unit_id"] = rec.unit_id;
    j["prompt"] = rec.prompt;
    j["video_uri"] = rec.video_uri;
    Json rollouts = Json::array();
    for (std::size_t i = 0; i < rec.rollouts.size(); ++i) {
      Json r;
      r["text"] = rec.rollouts[i].text;
      r["reward"] = rec.rollouts[i].reward;
      r["advantage"] = group.advantages[i];
      rollouts.push_back(std::move(r));
    }
    j["rollouts"] = std::move(rollouts);
    j["group_stats"]["mean"] = group.mean;
    j["group_stats"]["std"] = group.stddev;
    j["group_stats"]["eps"] = group.eps;
    body += j.dump();
    body += '\n';
    ++stats.written;
  }

  manifest.records = stats.written;
  std::string out;
  Json header;
  header["manifest"] = manifest_to_json(manifest);
  out += header.dump();
  out += '\n';
  out += body;
  write_text_file_atomic(path, out);
  return stats;
}

ParsedBatch read_training_batch(const std::filesystem::path& path) {
  const std::string content = read_text_file(path);
  std::istringstream in(content);
  std::string line;
  ParsedBatch batch;
  bool have_manifest = false;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    Json j = Json::parse(line);
    if (!have_manifest) {
      if (!j.contains("manifest")) {
        throw Error(ErrorCode::kParse,
                    "batch file must start with a manifest header");
      }
      batch.manifest = manifest_from_json(j.at("manifest"));
      have_manifest = true;
      continue;
    }
    BatchRecord rec;
    rec.unit_id = j.at("unit_id").get<std::string>();
    rec.prompt = j.at("prompt").get<std::string>();
    rec.video_uri = j.at("video_uri").get<std::string>();
    for (const Json& r : j.at("rollouts")) {
      rec.rollouts.push_back({r.at("text").get<std::string>(),
                              r.at("reward").get<double>(),
                              r.at("advantage").get<double>()});
    }
    rec.group_mean = j.at("group_stats").at("mean").get<double>();
    rec.group_std = j.at("group_stats").at("std").get<double>();
    rec.group_eps = j.at("group_stats").at("eps").get<double>();
    batch.records.push_back(std::move(rec));
  }
  if (!have_manifest) {
    throw Error(ErrorCode::kParse, "batch file is empty: " + path.string());
  }
  return batch;
}

}  // namespace evz
