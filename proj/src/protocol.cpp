#include "protocol.hpp"

#include <cctype>
#include <charconv>
#include <cmath>

#include "json.hpp"
#include "util.hpp"

namespace evz {

namespace {

using Json = nlohmann::ordered_json;

// Finds a balanced {...} candidate starting at `from`, honoring strings and
// escapes. Returns the substring or nullopt.
std::optional<std::string_view> balanced_object(std::string_view text,
                                                std::size_t from) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = from; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      --depth;
      if (depth == 0) return text.substr(from, i - from + 1);
      if (depth < 0) return std::nullopt;
    }
  }
  return std::nullopt;
}

std::optional<Json> extract_json_object(std::string_view text) {
  // Prefer the contents of a ``` fence when one is present.
  const std::size_t fence = text.find("```");
  if (fence != std::string_view::npos) {
    const std::size_t body_start = fence + 3;
    const std::size_t close = text.find("```", body_start);
    if (close != std::string_view::npos) {
      std::string_view inner = text.substr(body_start, close - body_start);
      const std::size_t brace = inner.find('{');
      if (brace != std::string_view::npos) {
        if (auto cand = balanced_object(inner, brace)) {
          Json j = Json::parse(*cand, nullptr, false);
          if (!j.is_discarded() && j.is_object()) return j;
        }
      }
    }
  }
  // Otherwise scan raw text; cap attempts so adversarial inputs stay cheap.
  int attempts = 0;
  std::size_t pos = text.find('{');
  while (pos != std::string_view::npos && attempts < 8) {
    if (auto cand = balanced_object(text, pos)) {
      Json j = Json::parse(*cand, nullptr, false);
      if (!j.is_discarded() && j.is_object()) return j;
    }
    ++attempts;
    pos = text.find('{', pos + 1);
  }
  return std::nullopt;
}

bool finite_number(const Json& j, double* out) {
  if (!j.is_number()) return false;
  const double v = j.get<double>();
  if (!std::isfinite(v)) return false;
  *out = v;
  return true;
}

std::optional<OptionLabel> parse_label_text(std::string_view raw) {
  const std::string t = trim(raw);
  if (t.size() != 1) return std::nullopt;
  return label_from_char(t[0]);
}

// Payload of the last <name>...</name> pair, if any.
std::optional<std::string_view> last_tag_payload(std::string_view text,
                                                 std::string_view name) {
  const std::string open = "<" + std::string(name) + ">";
  const std::string close = "</" + std::string(name) + ">";
  std::size_t search_end = text.size();
  for (;;) {
    const std::size_t o = text.rfind(open, search_end == 0 ? 0 : search_end - 1);
    if (o == std::string_view::npos) return std::nullopt;
    const std::size_t payload_start = o + open.size();
    const std::size_t c = text.find(close, payload_start);
    if (c != std::string_view::npos) {
      return text.substr(payload_start, c - payload_start);
    }
    if (o == 0) return std::nullopt;
    search_end = o;
  }
}

std::optional<double> parse_number(std::string_view raw) {
  const std::string t = trim(raw);
  if (t.empty()) return std::nullopt;
  double v = 0.0;
  const char* begin = t.data();
  const char* end = t.data() + t.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace

char to_char(OptionLabel label) {
  return static_cast<char>('A' + static_cast<int>(label));
}

std::optional<OptionLabel> label_from_char(char c) {
  const char u = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (u < 'A' || u >= 'A' + kOptionCount) return std::nullopt;
  return static_cast<OptionLabel>(u - 'A');
}

const char* to_string(FormatFailure f) {
  switch (f) {
    case FormatFailure::kMissingField: return "missing-field";
    case FormatFailure::kBadJson: return "bad-json";
    case FormatFailure::kBadSpanOrder: return "bad-span-order";
    case FormatFailure::kBadLabel: return "bad-label";
    case FormatFailure::kSpanOutOfRange: return "span-out-of-range";
    case FormatFailure::kWrongOptionCount: return "wrong-option-count";
  }
  return "unknown";
}

std::optional<FormatFailure> format_failure_from_string(std::string_view s) {
  for (FormatFailure f :
       {FormatFailure::kMissingField, FormatFailure::kBadJson,
        FormatFailure::kBadSpanOrder, FormatFailure::kBadLabel,
        FormatFailure::kSpanOutOfRange, FormatFailure::kWrongOptionCount}) {
    if (s == to_string(f)) return f;
  }
  return std::nullopt;
}

bool same_content(const SupervisionUnit& a, const SupervisionUnit& b) {
  return a.evidence == b.evidence && a.question == b.question &&
         a.options == b.options && a.answer == b.answer;
}

QuestionerParse parse_questioner_output(std::string_view text,
                                        const VideoContext& video) {
  auto fail = [](FormatFailure f) {
    return QuestionerParse{std::nullopt, FormatVerdict::fail(f)};
  };

  const auto obj = extract_json_object(text);
  if (!obj) return fail(FormatFailure::kBadJson);
  const Json& j = *obj;

  for (const char* key : {"evidence", "question", "options", "answer"}) {
    if (!j.contains(key)) return fail(FormatFailure::kMissingField);
  }

  SupervisionUnit unit;
  unit.video = video;

  const Json& question = j["question"];
  if (!question.is_string()) return fail(FormatFailure::kMissingField);
  unit.question = question.get<std::string>();
  if (unit.question.empty()) return fail(FormatFailure::kMissingField);

  const Json& options = j["options"];
  if (!options.is_array()) return fail(FormatFailure::kMissingField);
  if (options.size() != kOptionCount) {
    return fail(FormatFailure::kWrongOptionCount);
  }
  for (int i = 0; i < kOptionCount; ++i) {
    const Json& opt = options[static_cast<std::size_t>(i)];
    if (!opt.is_string()) return fail(FormatFailure::kMissingField);
    unit.options[static_cast<std::size_t>(i)] = opt.get<std::string>();
    if (unit.options[static_cast<std::size_t>(i)].empty()) {
      return fail(FormatFailure::kMissingField);
    }
  }

  const Json& answer = j["answer"];
  if (!answer.is_string()) return fail(FormatFailure::kMissingField);
  const auto label = parse_label_text(answer.get<std::string>());
  if (!label) return fail(FormatFailure::kBadLabel);
  unit.answer = *label;

  const Json& evidence = j["evidence"];
  if (!evidence.is_array()) return fail(FormatFailure::kMissingField);
  if (evidence.empty() || evidence.size() > 4) {
    // Cardinality violations of the evidence field share missing-field.
    return fail(FormatFailure::kMissingField);
  }
  for (const Json& item : evidence) {
    if (!item.is_object() || !item.contains("start") || !item.contains("end") ||
        !item.contains("description") || !item["description"].is_string()) {
      return fail(FormatFailure::kMissingField);
    }
    double start = 0.0;
    double end = 0.0;
    if (!finite_number(item["start"], &start) ||
        !finite_number(item["end"], &end)) {
      return fail(FormatFailure::kMissingField);
    }
    if (!(start < end)) return fail(FormatFailure::kBadSpanOrder);
    const auto span = clamp_span(start, end, video.duration_s);
    if (!span) return fail(FormatFailure::kSpanOutOfRange);
    unit.evidence.push_back({*span, item["description"].get<std::string>()});
  }

  return {std::move(unit), FormatVerdict::pass()};
}

RolloutResponse parse_solver_output(std::string_view text,
                                    const VideoContext& video) {
  RolloutResponse r;
  r.raw_text = std::string(text);

  if (const auto payload = last_tag_payload(text, "answer")) {
    if (const auto label = parse_label_text(*payload)) {
      r.answer = *label;
      r.valid = true;
    }
  }

  if (const auto payload = last_tag_payload(text, "span")) {
    const auto parts = split(*payload, ',');
    if (parts.size() == 2) {
      const auto start = parse_number(parts[0]);
      const auto end = parse_number(parts[1]);
      if (start && end) {
        r.span = clamp_span(*start, *end, video.duration_s);
      }
    }
  }

  return r;
}

double format_reward(const FormatVerdict& verdict, double bonus) {
  return verdict.ok ? bonus : 0.0;
}

std::string serialize_unit(const SupervisionUnit& unit) {
  Json j;
  Json evidence = Json::array();
  for (const Evidence& e : unit.evidence) {
    Json item;
    item["start"] = e.span.start();
    item["end"] = e.span.end();
    item["description"] = e.description;
    evidence.push_back(std::move(item));
  }
  j["evidence"] = std::move(evidence);
  j["question"] = unit.question;
  j["options"] = unit.options;
  j["answer"] = std::string(1, to_char(unit.answer));
  return j.dump();
}

}  // namespace evz
