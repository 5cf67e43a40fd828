#include "config.hpp"

#include <charconv>
#include <cstdlib>
#include <sstream>

#include "util.hpp"

namespace evz {

namespace {

double parse_double(const std::string& key, const std::string& value) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (end != value.c_str() + value.size() || value.empty() || errno == ERANGE) {
    throw Error(ErrorCode::kParse, "config: bad number for " + key + ": " + value);
  }
  return v;
}

int parse_int(const std::string& key, const std::string& value) {
  int v = 0;
  const auto [ptr, ec] =
      std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw Error(ErrorCode::kParse, "config: bad integer for " + key + ": " + value);
  }
  return v;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  const auto [ptr, ec] =
      std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw Error(ErrorCode::kParse, "config: bad seed for " + key + ": " + value);
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw Error(ErrorCode::kParse, "config: bad boolean for " + key + ": " + value);
}

std::vector<std::string> parse_list(const std::string& value) {
  std::vector<std::string> out;
  for (const std::string& piece : split(value, ',')) {
    const std::string t = trim(piece);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

std::string join_list(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ",";
    out += items[i];
  }
  return out;
}

void set_key(EngineConfig& c, const std::string& section,
             const std::string& key, const std::string& value) {
  const std::string full = section + "." + key;
  if (section == "engine") {
    if (key == "video_manifest") {
      c.video_manifest_path = value;
    } else if (key == "iterations") {
      c.iterations = parse_int(full, value);
    } else if (key == "videos_per_iter") {
      c.videos_per_iter = parse_int(full, value);
    } else if (key == "m_rollouts") {
      c.m_rollouts = parse_int(full, value);
    } else if (key == "n_pseudo") {
      c.n_pseudo = parse_int(full, value);
    } else if (key == "gate_min") {
      c.gate.s_min = parse_double(full, value);
    } else if (key == "gate_max") {
      c.gate.s_max = parse_double(full, value);
    } else if (key == "alpha") {
      c.alpha = parse_double(full, value);
    } else if (key == "fps") {
      c.fps = parse_double(full, value);
    } else if (key == "max_frames") {
      c.max_frames = parse_int(full, value);
    } else if (key == "units_per_video") {
      c.units_per_video = parse_int(full, value);
    } else if (key == "group_size_questioner") {
      c.group_size_questioner = parse_int(full, value);
    } else if (key == "group_size_solver") {
      c.group_size_solver = parse_int(full, value);
    } else if (key == "learning_rate") {
      c.learning_rate = parse_double(full, value);
    } else if (key == "kl_coefficient") {
      c.kl_coefficient = parse_double(full, value);
    } else if (key == "advantage_eps") {
      c.advantage_eps = parse_double(full, value);
    } else if (key == "fresh_pseudo_rollouts") {
      c.fresh_pseudo_rollouts = parse_bool(full, value);
    } else if (key == "seed") {
      c.seed = parse_u64(full, value);
    } else if (key == "output_dir") {
      c.output_dir = value;
    } else {
      throw Error(ErrorCode::kParse, "config: unknown key " + full);
    }
  } else if (section == "backend") {
    if (key == "kind") {
      const auto kind = backend_kind_from_string(value);
      if (!kind) {
        throw Error(ErrorCode::kParse, "config: backend.kind must be http or scripted");
      }
      c.backend.kind = *kind;
    } else if (key == "endpoint_url") {
      c.backend.endpoint_url = value;
    } else if (key == "model_name") {
      c.backend.model_name = value;
    } else if (key == "script_path") {
      c.backend.script_path = value;
    } else if (key == "max_parallel") {
      c.backend.max_parallel = parse_int(full, value);
    } else if (key == "retry_limit") {
      c.backend.retry_limit = parse_int(full, value);
    } else if (key == "timeout_s") {
      c.backend.timeout_s = parse_double(full, value);
    } else if (key == "temperature") {
      c.backend.temperature = parse_double(full, value);
    } else {
      throw Error(ErrorCode::kParse, "config: unknown key " + full);
    }
  } else if (section == "heuristics") {
    if (key == "event_keywords") {
      c.heuristics.event_keywords = parse_list(value);
    } else if (key == "temporal_keywords") {
      c.heuristics.temporal_keywords = parse_list(value);
    } else if (key == "coverage_suppression_threshold") {
      c.heuristics.coverage_suppression_threshold = parse_double(full, value);
    } else if (key == "evid_clip_lo") {
      c.heuristics.evid_clip_lo = parse_double(full, value);
    } else if (key == "evid_clip_hi") {
      c.heuristics.evid_clip_hi = parse_double(full, value);
    } else if (key == "easy_threshold") {
      c.heuristics.easy_threshold = parse_double(full, value);
    } else if (key == "easy_penalty") {
      c.heuristics.easy_penalty_value = parse_double(full, value);
    } else if (key == "format_bonus") {
      c.heuristics.format_bonus = parse_double(full, value);
    } else if (key == "w_learn") {
      c.heuristics.w_learn = parse_double(full, value);
    } else if (key == "w_dep") {
      c.heuristics.w_dep = parse_double(full, value);
    } else {
      throw Error(ErrorCode::kParse, "config: unknown key " + full);
    }
  } else {
    throw Error(ErrorCode::kParse, "config: unknown section [" + section + "]");
  }
}

}  // namespace

EngineConfig load_config(const std::filesystem::path& path) {
  EngineConfig config;
  const std::string content = read_text_file(path);
  std::istringstream in(content);
  std::string line;
  std::string section = "engine";
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[' && t.back() == ']') {
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::kParse, "config: expected key=value at line " +
                                         std::to_string(line_no) + " in " +
                                         path.string());
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    set_key(config, section, key, value);
  }
  return config;
}

void apply_override(EngineConfig& config, std::string_view assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw Error(ErrorCode::kInvalidArgument,
                "override must be key=value: " + std::string(assignment));
  }
  std::string key = trim(assignment.substr(0, eq));
  const std::string value = trim(assignment.substr(eq + 1));
  std::string section = "engine";
  const std::size_t dot = key.find('.');
  if (dot != std::string::npos) {
    section = key.substr(0, dot);
    key = key.substr(dot + 1);
  }
  set_key(config, section, key, value);
}

std::string dump_config(const EngineConfig& c) {
  std::string out;
  out += "[engine]\n";
  out += "video_manifest = " + c.video_manifest_path + "\n";
  out += "iterations = " + std::to_string(c.iterations) + "\n";
  out += "videos_per_iter = " + std::to_string(c.videos_per_iter) + "\n";
  out += "m_rollouts = " + std::to_string(c.m_rollouts) + "\n";
  out += "n_pseudo = " + std::to_string(c.n_pseudo) + "\n";
  out += "gate_min = " + format_double(c.gate.s_min) + "\n";
  out += "gate_max = " + format_double(c.gate.s_max) + "\n";
  out += "alpha = " + format_double(c.alpha) + "\n";
  out += "fps = " + format_double(c.fps) + "\n";
  out += "max_frames = " + std::to_string(c.max_frames) + "\n";
  out += "units_per_video = " + std::to_string(c.units_per_video) + "\n";
  out += "group_size_questioner = " + std::to_string(c.group_size_questioner) + "\n";
  out += "group_size_solver = " + std::to_string(c.group_size_solver) + "\n";
  out += "learning_rate = " + format_double(c.learning_rate) + "\n";
  out += "kl_coefficient = " + format_double(c.kl_coefficient) + "\n";
  out += "advantage_eps = " + format_double(c.advantage_eps) + "\n";
  out += std::string("fresh_pseudo_rollouts = ") +
         (c.fresh_pseudo_rollouts ? "true" : "false") + "\n";
  out += "seed = " + std::to_string(c.seed) + "\n";
  out += "output_dir = " + c.output_dir + "\n";
  out += "\n[backend]\n";
  out += std::string("kind = ") + to_string(c.backend.kind) + "\n";
  out += "endpoint_url = " + c.backend.endpoint_url + "\n";
  out += "model_name = " + c.backend.model_name + "\n";
  out += "script_path = " + c.backend.script_path + "\n";
  out += "max_parallel = " + std::to_string(c.backend.max_parallel) + "\n";
  out += "retry_limit = " + std::to_string(c.backend.retry_limit) + "\n";
  out += "timeout_s = " + format_double(c.backend.timeout_s) + "\n";
  out += "temperature = " + format_double(c.backend.temperature) + "\n";
  out += "\n[heuristics]\n";
  out += "format_bonus = " + format_double(c.heuristics.format_bonus) + "\n";
  out += "w_learn = " + format_double(c.heuristics.w_learn) + "\n";
  out += "w_dep = " + format_double(c.heuristics.w_dep) + "\n";
  out += "evid_clip_lo = " + format_double(c.heuristics.evid_clip_lo) + "\n";
  out += "evid_clip_hi = " + format_double(c.heuristics.evid_clip_hi) + "\n";
  out += "coverage_suppression_threshold = " +
         format_double(c.heuristics.coverage_suppression_threshold) + "\n";
  out += "easy_threshold = " + format_double(c.heuristics.easy_threshold) + "\n";
  out += "easy_penalty = " + format_double(c.heuristics.easy_penalty_value) + "\n";
  out += "event_keywords = " + join_list(c.heuristics.event_keywords) + "\n";
  out += "temporal_keywords = " + join_list(c.heuristics.temporal_keywords) + "\n";
  return out;
}

void validate_config(const EngineConfig& c) {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorCode::kInvalidArgument, "config: " + what);
  };
  require(c.iterations >= 0, "iterations must be non-negative");
  require(c.videos_per_iter > 0, "videos_per_iter must be positive");
  require(c.m_rollouts > 0, "m_rollouts must be positive");
  require(c.n_pseudo > 0, "n_pseudo must be positive");
  require(c.units_per_video > 0, "units_per_video must be positive");
  require(c.group_size_questioner > 0, "group_size_questioner must be positive");
  require(c.group_size_solver > 0, "group_size_solver must be positive");
  require(c.max_frames > 0, "max_frames must be positive");
  require(c.fps > 0.0, "fps must be positive");
  require(c.alpha >= 0.0, "alpha must be non-negative");
  require(c.gate.s_min >= 0.0 && c.gate.s_min < c.gate.s_max &&
              c.gate.s_max <= 1.0,
          "gate must satisfy 0 <= min < max <= 1");
  require(c.backend.max_parallel > 0, "backend.max_parallel must be positive");
  require(c.backend.retry_limit >= 0, "backend.retry_limit must be non-negative");
  if (c.backend.kind == BackendConfig::Kind::kScripted) {
    require(!c.backend.script_path.empty(),
            "scripted backend requires script_path");
  } else {
    const char* env = std::getenv("EVICOEVO_BACKEND_URL");
    require(!c.backend.endpoint_url.empty() || (env && *env),
            "http backend requires endpoint_url");
    require(!c.backend.model_name.empty(), "http backend requires model_name");
  }
}

}  // namespace evz
