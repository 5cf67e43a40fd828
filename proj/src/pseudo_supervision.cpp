#include "pseudo_supervision.hpp"

#include <algorithm>
#include <sstream>

#include "json.hpp"
#include "util.hpp"

namespace evz {

namespace {

using Json = nlohmann::ordered_json;

}  // namespace

const char* to_string(PseudoOrigin origin) {
  switch (origin) {
    case PseudoOrigin::kConsensus: return "consensus";
    case PseudoOrigin::kQuestionerFallback: return "questioner-fallback";
    case PseudoOrigin::kNone: return "none";
  }
  return "none";
}

std::optional<PseudoOrigin> pseudo_origin_from_string(std::string_view s) {
  if (s == "consensus") return PseudoOrigin::kConsensus;
  if (s == "questioner-fallback") return PseudoOrigin::kQuestionerFallback;
  if (s == "none") return PseudoOrigin::kNone;
  return std::nullopt;
}

PseudoLabel derive_pseudo_label(std::span<const RolloutResponse> rollouts,
                                const SupervisionUnit& unit) {
  if (rollouts.empty()) {
    throw Error(ErrorCode::kNoValidRollouts,
                "derive_pseudo_label: no rollouts");
  }
  int counts[kOptionCount] = {0, 0, 0, 0};
  int valid = 0;
  for (const RolloutResponse& r : rollouts) {
    if (r.valid && r.answer) {
      ++counts[static_cast<int>(*r.answer)];
      ++valid;
    }
  }
  if (valid == 0) {
    throw Error(ErrorCode::kNoValidRollouts,
                "derive_pseudo_label: all rollouts invalid");
  }
  int majority = 0;
  for (int i = 1; i < kOptionCount; ++i) {
    if (counts[i] > counts[majority]) majority = i;
  }

  PseudoLabel label;
  label.label = static_cast<OptionLabel>(majority);
  label.support = static_cast<double>(counts[majority]) /
                  static_cast<double>(rollouts.size());

  std::vector<TimeSpan> agreeing;
  for (const RolloutResponse& r : rollouts) {
    if (r.valid && r.answer && *r.answer == label.label && r.span) {
      agreeing.push_back(*r.span);
    }
  }
  if (auto consensus = median_consensus(agreeing)) {
    label.span = consensus;
    label.origin = PseudoOrigin::kConsensus;
  } else if (!unit.evidence.empty()) {
    label.span = unit.evidence.front().span;
    label.origin = PseudoOrigin::kQuestionerFallback;
  } else {
    label.origin = PseudoOrigin::kNone;
  }
  return label;
}

bool gate_retains(const PseudoLabel& label, const CurriculumGate& gate) {
  return label.support >= gate.s_min && label.support <= gate.s_max;
}

std::vector<DatasetRecord> build_dataset(
    const std::vector<DatasetBuildInput>& inputs, const CurriculumGate& gate,
    BuildReport* report) {
  BuildReport local;
  std::vector<DatasetRecord> records;
  for (const DatasetBuildInput& in : inputs) {
    ++local.generated;
    if (!in.verdict.ok) {
      ++local.dropped_format;
      continue;
    }
    PseudoLabel pseudo;
    try {
      pseudo = derive_pseudo_label(in.rollouts, in.unit);
    } catch (const Error&) {
      ++local.dropped_no_label;
      continue;
    }
    if (!gate_retains(pseudo, gate)) {
      ++local.dropped_gate;
      continue;
    }
    ++local.retained;
    records.push_back({in.unit, in.iteration, pseudo, in.scores});
  }
  std::sort(records.begin(), records.end(),
            [](const DatasetRecord& a, const DatasetRecord& b) {
              return a.unit.unit_id < b.unit.unit_id;
            });
  if (report) *report = local;
  return records;
}

namespace {

Json span_to_json(const std::optional<TimeSpan>& span) {
  if (!span) return nullptr;
  return Json::array({span->start(), span->end()});
}

Json scores_to_json(const QuestionerScore& s) {
  Json j;
  j["r_format"] = s.r_format;
  j["consistency"] = s.consistency;
  j["r_learn_raw"] = s.r_learn_raw;
  j["delta_video"] = s.delta_video;
  j["r_dep_raw"] = s.r_dep_raw;
  j["s_span"] = s.s_span;
  j["s_event"] = s.s_event;
  j["s_temp"] = s.s_temp;
  j["r_evid"] = s.r_evid;
  j["easy_penalty"] = s.easy_penalty;
  j["r_q_total"] = s.r_q_total;
  return j;
}

QuestionerScore scores_from_json(const Json& j) {
  QuestionerScore s;
  s.r_format = j.at("r_format").get<double>();
  s.consistency = j.at("consistency").get<double>();
  s.r_learn_raw = j.at("r_learn_raw").get<double>();
  s.delta_video = j.at("delta_video").get<double>();
  s.r_dep_raw = j.at("r_dep_raw").get<double>();
  s.s_span = j.at("s_span").get<double>();
  s.s_event = j.at("s_event").get<double>();
  s.s_temp = j.at("s_temp").get<double>();
  s.r_evid = j.at("r_evid").get<double>();
  s.easy_penalty = j.at("easy_penalty").get<double>();
  s.r_q_total = j.at("r_q_total").get<double>();
  return s;
}

}  // namespace

std::string serialize_dataset_record(const DatasetRecord& record) {
  Json j;
  j["unit_id"] = record.unit.unit_id;
  j["iter"] = record.iteration;
  j["video"]["id"] = record.unit.video.id;
  j["video"]["uri"] = record.unit.video.uri;
  j["video"]["duration_s"] = record.unit.video.duration_s;
  Json evidence = Json::array();
  for (const Evidence& e : record.unit.evidence) {
    Json item;
    item["start"] = e.span.start();
    item["end"] = e.span.end();
    item["description"] = e.description;
    evidence.push_back(std::move(item));
  }
  j["evidence"] = std::move(evidence);
  j["question"] = record.unit.question;
  j["options"] = record.unit.options;
  j["answer_q"] = std::string(1, to_char(record.unit.answer));
  j["pseudo"]["label"] = std::string(1, to_char(record.pseudo.label));
  j["pseudo"]["support"] = record.pseudo.support;
  j["pseudo"]["span"] = span_to_json(record.pseudo.span);
  j["pseudo"]["origin"] = to_string(record.pseudo.origin);
  j["scores"] = scores_to_json(record.scores);
  return j.dump();
}

DatasetRecord parse_dataset_record(const std::string& line) {
  Json j = Json::parse(line);
  DatasetRecord record;
  record.unit.unit_id = j.at("unit_id").get<std::string>();
  record.iteration = j.at("iter").get<int>();
  record.unit.video.id = j.at("video").at("id").get<std::string>();
  record.unit.video.uri = j.at("video").at("uri").get<std::string>();
  record.unit.video.duration_s = j.at("video").at("duration_s").get<double>();
  for (const Json& item : j.at("evidence")) {
    const auto span = TimeSpan::make(item.at("start").get<double>(),
                                     item.at("end").get<double>());
    if (!span) {
      throw Error(ErrorCode::kParse, "dataset record has an invalid span");
    }
    record.unit.evidence.push_back(
        {*span, item.at("description").get<std::string>()});
  }
  record.unit.question = j.at("question").get<std::string>();
  const Json& options = j.at("options");
  if (options.size() != kOptionCount) {
    throw Error(ErrorCode::kParse, "dataset record needs 4 options");
  }
  for (int i = 0; i < kOptionCount; ++i) {
    record.unit.options[static_cast<std::size_t>(i)] =
        options[static_cast<std::size_t>(i)].get<std::string>();
  }
  const auto answer =
      label_from_char(j.at("answer_q").get<std::string>().at(0));
  if (!answer) throw Error(ErrorCode::kParse, "dataset record has bad label");
  record.unit.answer = *answer;

  const Json& pseudo = j.at("pseudo");
  const auto pl = label_from_char(pseudo.at("label").get<std::string>().at(0));
  if (!pl) throw Error(ErrorCode::kParse, "dataset record has bad pseudo label");
  record.pseudo.label = *pl;
  record.pseudo.support = pseudo.at("support").get<double>();
  if (!pseudo.at("span").is_null()) {
    const auto span = TimeSpan::make(pseudo.at("span")[0].get<double>(),
                                     pseudo.at("span")[1].get<double>());
    if (!span) throw Error(ErrorCode::kParse, "dataset pseudo span invalid");
    record.pseudo.span = span;
  }
  const auto origin =
      pseudo_origin_from_string(pseudo.at("origin").get<std::string>());
  if (!origin) throw Error(ErrorCode::kParse, "dataset pseudo origin invalid");
  record.pseudo.origin = *origin;

  record.scores = scores_from_json(j.at("scores"));
  return record;
}

void write_dataset_jsonl(const std::filesystem::path& path,
                         const std::vector<DatasetRecord>& records) {
  std::string out;
  for (const DatasetRecord& r : records) {
    out += serialize_dataset_record(r);
    out += '\n';
  }
  write_text_file_atomic(path, out);
}

std::vector<DatasetRecord> read_dataset_jsonl(
    const std::filesystem::path& path) {
  const std::string content = read_text_file(path);
  std::istringstream in(content);
  std::vector<DatasetRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    records.push_back(parse_dataset_record(line));
  }
  return records;
}

}  // namespace evz
