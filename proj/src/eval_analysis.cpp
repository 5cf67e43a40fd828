#include "eval_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <unordered_map>

#include "backend.hpp"
#include "json.hpp"

namespace evz {

namespace {

using Json = nlohmann::ordered_json;

double record_tiou(const EvalRecord& r) {
  if (!r.pred.span || !r.gt_span) return 0.0;
  return tiou(*r.pred.span, *r.gt_span);
}

}  // namespace

GroundingMetrics grounding_metrics(std::span<const EvalRecord> records) {
  if (records.empty()) {
    throw Error(ErrorCode::kEmptyInput, "grounding_metrics: no records");
  }
  GroundingMetrics m;
  double sum = 0.0;
  int at03 = 0;
  int at05 = 0;
  int at07 = 0;
  for (const EvalRecord& r : records) {
    if (!r.gt_span) {
      throw Error(ErrorCode::kInvalidArgument,
                  "grounding_metrics: record lacks a ground-truth span");
    }
    const double iou = record_tiou(r);
    sum += iou;
    if (iou >= 0.3) ++at03;
    if (iou >= 0.5) ++at05;
    if (iou >= 0.7) ++at07;
  }
  const double n = static_cast<double>(records.size());
  m.miou = sum / n;
  m.r_at_03 = at03 / n;
  m.r_at_05 = at05 / n;
  m.r_at_07 = at07 / n;
  return m;
}

GqaMetrics gqa_metrics(std::span<const EvalRecord> records) {
  if (records.empty()) {
    throw Error(ErrorCode::kEmptyInput, "gqa_metrics: no records");
  }
  int at03 = 0;
  int at05 = 0;
  for (const EvalRecord& r : records) {
    if (!r.gt_answer || !r.gt_span) {
      throw Error(ErrorCode::kInvalidArgument,
                  "gqa_metrics: record needs both ground-truth answer and span");
    }
    const bool answer_ok =
        r.pred.valid && r.pred.answer && *r.pred.answer == *r.gt_answer;
    if (!answer_ok) continue;
    const double iou = record_tiou(r);
    if (iou >= 0.3) ++at03;
    if (iou >= 0.5) ++at05;
  }
  const double n = static_cast<double>(records.size());
  return {at03 / n, at05 / n};
}

double dependency_gap(double with_acc, double without_acc) {
  return with_acc - without_acc;
}

KeySpanMetrics key_span_metrics(double acc_full, double acc_key,
                                double acc_mask, double acc_rand) {
  return {acc_full - acc_mask, acc_key - acc_rand};
}

namespace {

// Frames with span.start <= t < span.end.
std::vector<std::size_t> frames_inside(std::span<const double> frames,
                                       double start, double end) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (frames[i] >= start && frames[i] < end) out.push_back(i);
  }
  return out;
}

// Grows or shrinks `chosen` to `target` by proximity to `center`, drawing
// candidates from all frame indices; ties prefer the lower index.
std::vector<std::size_t> fit_to_size(std::vector<std::size_t> chosen,
                                     std::size_t target,
                                     std::span<const double> frames,
                                     double center) {
  auto closer = [&](std::size_t a, std::size_t b) {
    const double da = std::abs(frames[a] - center);
    const double db = std::abs(frames[b] - center);
    if (da != db) return da < db;
    return a < b;
  };
  if (chosen.size() > target) {
    std::sort(chosen.begin(), chosen.end(), closer);
    chosen.resize(target);
  } else if (chosen.size() < target) {
    std::vector<bool> used(frames.size(), false);
    for (std::size_t i : chosen) used[i] = true;
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < frames.size(); ++i) {
      if (!used[i]) pool.push_back(i);
    }
    std::sort(pool.begin(), pool.end(), closer);
    for (std::size_t i : pool) {
      if (chosen.size() >= target) break;
      chosen.push_back(i);
    }
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

}  // namespace

FrameConditionPlan frame_condition_plan(std::span<const double> frames,
                                        const TimeSpan& key, double duration_s,
                                        Rng& rng) {
  if (!(duration_s > 0.0) || !key.within(duration_s)) {
    throw Error(ErrorCode::kInvalidArgument,
                "frame_condition_plan: key span must lie within the video");
  }
  FrameConditionPlan plan;
  plan.full.resize(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) plan.full[i] = i;

  plan.only_key = frames_inside(frames, key.start(), key.end());
  plan.only_key_empty = plan.only_key.empty();
  {
    std::vector<bool> in_key(frames.size(), false);
    for (std::size_t i : plan.only_key) in_key[i] = true;
    for (std::size_t i = 0; i < frames.size(); ++i) {
      if (!in_key[i]) plan.mask_key.push_back(i);
    }
  }

  // Place an equal-length span uniformly over positions whose interval does
  // not touch the key span; fall back to an overlapping position only when
  // no such placement exists.
  const double len = key.length();
  double start = 0.0;
  struct Segment {
    double lo;
    double hi;
  };
  std::vector<Segment> segments;
  if (key.start() - len >= 0.0) segments.push_back({0.0, key.start() - len});
  if (duration_s - len >= key.end()) {
    segments.push_back({key.end(), duration_s - len});
  }
  double total = 0.0;
  for (const Segment& s : segments) total += s.hi - s.lo;
  if (total > 0.0) {
    double u = rng.uniform01() * total;
    for (const Segment& s : segments) {
      const double w = s.hi - s.lo;
      if (u <= w) {
        start = s.lo + u;
        break;
      }
      u -= w;
    }
  } else if (!segments.empty()) {
    start = segments.front().lo;  // a single exact-fit position
  } else {
    const double room = std::max(0.0, duration_s - len);
    start = rng.uniform01() * room;  // overlap is unavoidable
  }
  plan.random_start = start;
  plan.random_end = start + len;

  plan.random = fit_to_size(
      frames_inside(frames, plan.random_start, plan.random_end),
      plan.only_key.size(), frames, plan.random_start + len / 2.0);
  return plan;
}

namespace {

struct PredictionRow {
  std::optional<OptionLabel> answer;
  double raw_start = 0.0;
  double raw_end = 0.0;
  bool has_span = false;
};

std::optional<OptionLabel> label_from_json(const Json& j) {
  if (!j.is_string()) return std::nullopt;
  const std::string s = trim(j.get<std::string>());
  if (s.size() != 1) return std::nullopt;
  return label_from_char(s[0]);
}

std::unordered_map<std::string, PredictionRow> load_predictions(
    const std::filesystem::path& path) {
  const std::string content = read_text_file(path);
  std::istringstream in(content);
  std::unordered_map<std::string, PredictionRow> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("question_id")) {
      throw Error(ErrorCode::kParse, "bad prediction row at line " +
                                         std::to_string(line_no) + " in " +
                                         path.string());
    }
    PredictionRow row;
    if (j.contains("answer")) row.answer = label_from_json(j["answer"]);
    if (j.contains("span") && j["span"].is_array() && j["span"].size() == 2 &&
        j["span"][0].is_number() && j["span"][1].is_number()) {
      row.raw_start = j["span"][0].get<double>();
      row.raw_end = j["span"][1].get<double>();
      row.has_span = true;
    }
    rows[j["question_id"].get<std::string>()] = row;
  }
  return rows;
}

struct GroundTruthRow {
  std::string question_id;
  std::optional<OptionLabel> answer;
  std::optional<TimeSpan> span;
  double duration_s = 0.0;
};

std::vector<GroundTruthRow> load_ground_truth(
    const std::filesystem::path& path) {
  const std::string content = read_text_file(path);
  std::istringstream in(content);
  std::vector<GroundTruthRow> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("question_id") ||
        !j.contains("duration_s") || !j["duration_s"].is_number()) {
      throw Error(ErrorCode::kParse, "bad ground-truth row at line " +
                                         std::to_string(line_no) + " in " +
                                         path.string());
    }
    GroundTruthRow row;
    row.question_id = j["question_id"].get<std::string>();
    row.duration_s = j["duration_s"].get<double>();
    if (j.contains("answer")) row.answer = label_from_json(j["answer"]);
    if (j.contains("span") && j["span"].is_array() && j["span"].size() == 2) {
      row.span = TimeSpan::make(j["span"][0].get<double>(),
                                j["span"][1].get<double>());
    }
    if (!row.answer && !row.span) {
      throw Error(ErrorCode::kParse,
                  "ground-truth row needs an answer or a span at line " +
                      std::to_string(line_no));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

// Benchmark scoring is strict: a span outside [0, duration] or inverted is
// treated as absent rather than clamped.
std::optional<TimeSpan> strict_span(const PredictionRow& row,
                                    double duration_s) {
  if (!row.has_span) return std::nullopt;
  const auto span = TimeSpan::make(row.raw_start, row.raw_end);
  if (!span || !span->within(duration_s)) return std::nullopt;
  return span;
}

double pct(double fraction) { return round2(fraction * 100.0); }

}  // namespace

EvalReport evaluate_files(const std::filesystem::path& predictions_path,
                          const std::filesystem::path& ground_truth_path) {
  const auto predictions = load_predictions(predictions_path);
  const auto ground_truth = load_ground_truth(ground_truth_path);

  std::vector<EvalRecord> grounding;
  std::vector<EvalRecord> gqa;
  int answered = 0;
  int answer_correct = 0;
  int missing_predictions = 0;

  for (const GroundTruthRow& gt : ground_truth) {
    EvalRecord rec;
    rec.question_id = gt.question_id;
    rec.gt_answer = gt.answer;
    rec.gt_span = gt.span;
    rec.duration_s = gt.duration_s;
    const auto it = predictions.find(gt.question_id);
    if (it == predictions.end()) {
      ++missing_predictions;  // scores as incorrect
    } else {
      rec.pred.answer = it->second.answer;
      rec.pred.valid = it->second.answer.has_value();
      rec.pred.span = strict_span(it->second, gt.duration_s);
    }
    if (gt.answer) {
      ++answered;
      if (rec.pred.valid && rec.pred.answer == gt.answer) ++answer_correct;
    }
    if (gt.span) grounding.push_back(rec);
    if (gt.answer && gt.span) gqa.push_back(rec);
  }

  Json report;
  report["ground_truth_records"] = static_cast<int>(ground_truth.size());
  report["missing_predictions"] = missing_predictions;
  if (!grounding.empty()) {
    const GroundingMetrics m = grounding_metrics(grounding);
    report["mIoU"] = pct(m.miou);
    report["R@0.3"] = pct(m.r_at_03);
    report["R@0.5"] = pct(m.r_at_05);
    report["R@0.7"] = pct(m.r_at_07);
  }
  if (!gqa.empty()) {
    const GqaMetrics m = gqa_metrics(gqa);
    report["GQA@0.3"] = pct(m.gqa_at_03);
    report["GQA@0.5"] = pct(m.gqa_at_05);
  }
  if (answered > 0) {
    report["answer_accuracy"] =
        pct(static_cast<double>(answer_correct) / answered);
  }
  return {report.dump(2)};
}

namespace {

struct AnnotationRow {
  std::string question_id;
  OptionLabel ref_answer = OptionLabel::kA;
  TimeSpan key_span;
  double duration_s = 0.0;

  AnnotationRow() : key_span(*TimeSpan::make(0.0, 1.0)) {}
};

std::vector<AnnotationRow> load_annotations(
    const std::filesystem::path& path) {
  const std::string content = read_text_file(path);
  std::istringstream in(content);
  std::vector<AnnotationRow> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    Json j = Json::parse(line, nullptr, false);
    const std::string where =
        " at line " + std::to_string(line_no) + " in " + path.string();
    if (j.is_discarded() || !j.is_object() || !j.contains("question_id") ||
        !j.contains("ref_answer") || !j.contains("key_span") ||
        !j.contains("duration_s")) {
      throw Error(ErrorCode::kParse, "bad annotation row" + where);
    }
    AnnotationRow row;
    row.question_id = j["question_id"].get<std::string>();
    const auto label = label_from_json(j["ref_answer"]);
    if (!label) throw Error(ErrorCode::kParse, "bad ref_answer" + where);
    row.ref_answer = *label;
    row.duration_s = j["duration_s"].get<double>();
    const Json& span = j["key_span"];
    if (!span.is_array() || span.size() != 2) {
      throw Error(ErrorCode::kParse, "bad key_span" + where);
    }
    const auto key =
        TimeSpan::make(span[0].get<double>(), span[1].get<double>());
    if (!key || !key->within(row.duration_s)) {
      throw Error(ErrorCode::kParse, "key_span outside video" + where);
    }
    row.key_span = *key;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

std::string evidence_plan_files(const std::filesystem::path& annotations_path,
                                const std::filesystem::path& out_dir,
                                std::uint64_t seed, double fps,
                                int max_frames) {
  const auto annotations = load_annotations(annotations_path);
  std::filesystem::create_directories(out_dir);

  std::string lines;
  int warnings = 0;
  for (const AnnotationRow& row : annotations) {
    const auto frames = sample_frames(row.duration_s, fps, max_frames);
    Rng rng(mix_seed(seed, {"evidence", row.question_id}));
    const FrameConditionPlan plan =
        frame_condition_plan(frames, row.key_span, row.duration_s, rng);
    if (plan.only_key_empty) ++warnings;

    auto stamps = [&frames](const std::vector<std::size_t>& idx) {
      Json arr = Json::array();
      for (std::size_t i : idx) arr.push_back(frames[i]);
      return arr;
    };
    Json j;
    j["question_id"] = row.question_id;
    j["full"] = stamps(plan.full);
    j["only_key"] = stamps(plan.only_key);
    j["mask_key"] = stamps(plan.mask_key);
    j["random"] = stamps(plan.random);
    j["random_span"] = Json::array({plan.random_start, plan.random_end});
    j["empty_only_key"] = plan.only_key_empty;
    lines += j.dump();
    lines += '\n';
  }
  write_text_file_atomic(out_dir / "conditions.jsonl", lines);

  Json summary;
  summary["questions"] = static_cast<int>(annotations.size());
  summary["empty_only_key_warnings"] = warnings;
  summary["conditions_path"] = (out_dir / "conditions.jsonl").string();
  return summary.dump(2);
}

std::string evidence_report_files(
    const std::filesystem::path& annotations_path,
    const std::filesystem::path& pred_full,
    const std::filesystem::path& pred_key,
    const std::filesystem::path& pred_mask,
    const std::filesystem::path& pred_rand) {
  const auto annotations = load_annotations(annotations_path);
  if (annotations.empty()) {
    throw Error(ErrorCode::kEmptyInput, "no annotations to score");
  }

  auto accuracy = [&](const std::filesystem::path& path) {
    const auto predictions = load_predictions(path);
    int correct = 0;
    for (const AnnotationRow& row : annotations) {
      const auto it = predictions.find(row.question_id);
      if (it == predictions.end() || !it->second.answer) continue;
      if (*it->second.answer == row.ref_answer) ++correct;
    }
    return static_cast<double>(correct) /
           static_cast<double>(annotations.size());
  };

  const double acc_full = accuracy(pred_full);
  const double acc_key = accuracy(pred_key);
  const double acc_mask = accuracy(pred_mask);
  const double acc_rand = accuracy(pred_rand);
  const KeySpanMetrics m =
      key_span_metrics(acc_full, acc_key, acc_mask, acc_rand);

  Json report;
  report["questions"] = static_cast<int>(annotations.size());
  report["acc_full"] = pct(acc_full);
  report["acc_key"] = pct(acc_key);
  report["acc_mask"] = pct(acc_mask);
  report["acc_rand"] = pct(acc_rand);
  report["key_necessity"] = pct(m.necessity);
  report["key_specificity"] = pct(m.specificity);
  return report.dump(2);
}

}  // namespace evz
