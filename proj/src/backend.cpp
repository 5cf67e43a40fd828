#include "backend.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "util.hpp"

namespace evz {

namespace {

using Json = nlohmann::ordered_json;

}  // namespace

const char* to_string(Role role) {
  return role == Role::kQuestioner ? "questioner" : "solver";
}

const char* to_string(BackendConfig::Kind kind) {
  return kind == BackendConfig::Kind::kHttp ? "http" : "scripted";
}

std::optional<BackendConfig::Kind> backend_kind_from_string(
    std::string_view s) {
  if (s == "http") return BackendConfig::Kind::kHttp;
  if (s == "scripted") return BackendConfig::Kind::kScripted;
  return std::nullopt;
}

std::string fingerprint(const PromptRequest& request) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto feed = [&h](std::string_view piece) {
    h = fnv1a64(piece, h);
    h = fnv1a64(std::string_view("\x1f", 1), h);
  };
  feed(to_string(request.role));
  feed(request.video ? request.video->id : "novideo");
  feed(request.context_id);
  feed(request.body);
  feed(std::to_string(request.seed));
  return to_hex(h);
}

ConcurrencyLimiter::ConcurrencyLimiter(int max_parallel)
    : available_(max_parallel < 1 ? 1 : max_parallel) {}

ConcurrencyLimiter::Slot::Slot(ConcurrencyLimiter& limiter)
    : limiter_(limiter) {
  std::unique_lock lock(limiter_.mutex_);
  limiter_.cv_.wait(lock, [&] { return limiter_.available_ > 0; });
  --limiter_.available_;
  ++limiter_.inflight_;
  limiter_.peak_ = std::max(limiter_.peak_, limiter_.inflight_);
}

ConcurrencyLimiter::Slot::~Slot() {
  {
    std::lock_guard lock(limiter_.mutex_);
    ++limiter_.available_;
    --limiter_.inflight_;
  }
  limiter_.cv_.notify_one();
}

int ConcurrencyLimiter::peak() const {
  std::lock_guard lock(mutex_);
  return peak_;
}

ScriptedBackend::ScriptedBackend(const std::string& script_path,
                                 int max_parallel)
    : limiter_(max_parallel) {
  const std::string content = read_text_file(script_path);
  std::istringstream in(content);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("fingerprint") ||
        !j.contains("responses") || !j["responses"].is_array()) {
      throw Error(ErrorCode::kParse, "bad script record at line " +
                                         std::to_string(line_no) + " in " +
                                         script_path);
    }
    std::vector<std::string> responses;
    for (const Json& r : j["responses"]) {
      if (!r.is_string()) {
        throw Error(ErrorCode::kParse, "non-string response at line " +
                                           std::to_string(line_no) + " in " +
                                           script_path);
      }
      responses.push_back(r.get<std::string>());
    }
    records_[j["fingerprint"].get<std::string>()] = std::move(responses);
  }
}

std::vector<std::string> ScriptedBackend::complete(
    const PromptRequest& request) {
  if (request.sample_count < 1) {
    throw Error(ErrorCode::kInvalidArgument,
                "complete: sample_count must be positive");
  }
  ConcurrencyLimiter::Slot slot(limiter_);
  if (test_delay_ms_ > 0) {
    std::this_thread::sleep_for(std::chrono::milliseconds(test_delay_ms_));
  }
  const std::string fp = fingerprint(request);
  const auto it = records_.find(fp);
  if (it == records_.end() || it->second.empty()) {
    throw Error(ErrorCode::kProtocol,
                "no scripted responses for fingerprint " + fp);
  }
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(request.sample_count));
  for (int i = 0; i < request.sample_count; ++i) {
    out.push_back(
        it->second[static_cast<std::size_t>(i) % it->second.size()]);
  }
  return out;
}

namespace {

class HttpBackend : public Backend {
 public:
  explicit HttpBackend(const BackendConfig& config)
      : config_(config), limiter_(config.max_parallel) {
    const char* env = std::getenv("EVICOEVO_BACKEND_URL");
    std::string url = (env && *env) ? env : config.endpoint_url;
    // Split scheme://authority from an optional path prefix.
    const std::size_t scheme = url.find("://");
    const std::size_t path_start =
        url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    if (path_start == std::string::npos) {
      base_ = url;
    } else {
      base_ = url.substr(0, path_start);
      std::string prefix = url.substr(path_start);
      while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
      prefix_ = prefix;
    }
  }

  std::vector<std::string> complete(const PromptRequest& request) override {
    if (request.sample_count < 1) {
      throw Error(ErrorCode::kInvalidArgument,
                  "complete: sample_count must be positive");
    }
    ConcurrencyLimiter::Slot slot(limiter_);
    const std::string fp = fingerprint(request);
    const std::string payload = request_json(request).dump();

    std::string last_failure = "no attempt made";
    for (int attempt = 0; attempt <= config_.retry_limit; ++attempt) {
      if (attempt > 0) {
        const auto backoff =
            std::chrono::milliseconds(100LL << std::min(attempt - 1, 6));
        std::this_thread::sleep_for(backoff);
      }
      httplib::Client client(base_);
      const std::chrono::duration<double> timeout(config_.timeout_s);
      client.set_connection_timeout(timeout);
      client.set_read_timeout(timeout);
      auto res = client.Post(prefix_ + "/chat/completions", payload,
                             "application/json");
      if (!res) {
        last_failure = "transport error: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status < 200 || res->status >= 300) {
        last_failure = "http status " + std::to_string(res->status);
        continue;
      }
      return parse_reply(res->body, request.sample_count, fp);
    }
    throw Error(ErrorCode::kBackend,
                "backend unreachable after " +
                    std::to_string(config_.retry_limit + 1) + " attempts (" +
                    last_failure + "), fingerprint " + fp);
  }

  int peak_concurrency() const override { return limiter_.peak(); }

 private:
  Json request_json(const PromptRequest& request) const {
    Json content = Json::array();
    if (request.video) {
      Json video;
      video["type"] = "video";
      video["video"]["uri"] = request.video->uri;
      video["video"]["frame_timestamps"] = request.frame_timestamps;
      content.push_back(std::move(video));
    }
    Json text;
    text["type"] = "text";
    text["text"] = request.body;
    content.push_back(std::move(text));

    Json body;
    body["model"] = config_.model_name;
    body["messages"] =
        Json::array({Json{{"role", "user"}, {"content", std::move(content)}}});
    body["n"] = request.sample_count;
    body["temperature"] = request.temperature;
    body["seed"] = request.seed;
    return body;
  }

  static std::vector<std::string> parse_reply(const std::string& body,
                                              int sample_count,
                                              const std::string& fp) {
    Json j = Json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("choices") ||
        !j["choices"].is_array()) {
      throw Error(ErrorCode::kProtocol,
                  "malformed completion reply, fingerprint " + fp);
    }
    std::vector<std::string> out;
    for (const Json& choice : j["choices"]) {
      if (!choice.contains("message") ||
          !choice["message"].contains("content") ||
          !choice["message"]["content"].is_string()) {
        throw Error(ErrorCode::kProtocol,
                    "malformed choice in reply, fingerprint " + fp);
      }
      out.push_back(choice["message"]["content"].get<std::string>());
    }
    if (static_cast<int>(out.size()) != sample_count) {
      throw Error(ErrorCode::kProtocol,
                  "reply has " + std::to_string(out.size()) + " choices, " +
                      std::to_string(sample_count) +
                      " requested, fingerprint " + fp);
    }
    return out;
  }

  BackendConfig config_;
  ConcurrencyLimiter limiter_;
  std::string base_;
  std::string prefix_;
};

}  // namespace

std::unique_ptr<Backend> make_backend(const BackendConfig& config) {
  if (config.kind == BackendConfig::Kind::kScripted) {
    if (config.script_path.empty()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "scripted backend requires script_path");
    }
    return std::make_unique<ScriptedBackend>(config.script_path,
                                             config.max_parallel);
  }
  const char* env = std::getenv("EVICOEVO_BACKEND_URL");
  if (config.endpoint_url.empty() && !(env && *env)) {
    throw Error(ErrorCode::kInvalidArgument,
                "http backend requires endpoint_url");
  }
  if (config.model_name.empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "http backend requires model_name");
  }
  return std::make_unique<HttpBackend>(config);
}

std::vector<std::string> RolloutCache::complete(Backend& backend,
                                                const PromptRequest& request) {
  const std::string fp = fingerprint(request);
  const auto n = static_cast<std::size_t>(request.sample_count);
  {
    std::lock_guard lock(mutex_);
    const auto it = by_fingerprint_.find(fp);
    if (it != by_fingerprint_.end() && it->second.size() >= n) {
      return {it->second.begin(), it->second.begin() + static_cast<long>(n)};
    }
  }
  std::vector<std::string> responses = backend.complete(request);
  {
    std::lock_guard lock(mutex_);
    auto& cached = by_fingerprint_[fp];
    if (cached.size() < responses.size()) cached = responses;
  }
  return responses;
}

void RolloutCache::clear() {
  std::lock_guard lock(mutex_);
  by_fingerprint_.clear();
}

std::vector<std::vector<std::string>> complete_all(
    Backend& backend, RolloutCache* cache,
    std::span<const PromptRequest> requests, int max_parallel) {
  std::vector<std::vector<std::string>> results(requests.size());
  if (requests.empty()) return results;

  const int workers = static_cast<int>(
      std::min<std::size_t>(requests.size(),
                            static_cast<std::size_t>(std::max(1, max_parallel))));
  std::atomic<std::size_t> next{0};
  std::mutex failure_mutex;
  std::size_t failed_index = requests.size();
  std::exception_ptr failure;

  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= requests.size()) return;
      try {
        results[i] = cache ? cache->complete(backend, requests[i])
                           : backend.complete(requests[i]);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (i < failed_index) {
          failed_index = i;
          failure = std::current_exception();
        }
      }
    }
  };

  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) threads.emplace_back(work);
  for (auto& t : threads) t.join();

  if (failure) std::rethrow_exception(failure);
  return results;
}

std::vector<double> sample_frames(double duration_s, double fps,
                                  int max_frames) {
  if (!(duration_s > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "sample_frames: duration must be positive");
  }
  if (!(fps > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "sample_frames: fps must be positive");
  }
  if (max_frames < 1) {
    throw Error(ErrorCode::kInvalidArgument,
                "sample_frames: max_frames must be positive");
  }
  long long grid =
      static_cast<long long>(std::ceil(duration_s * fps - 1e-12));
  if (grid < 1) grid = 1;
  while (grid > 1 && static_cast<double>(grid - 1) / fps >= duration_s) {
    --grid;
  }
  std::vector<double> out;
  if (grid <= max_frames) {
    out.reserve(static_cast<std::size_t>(grid));
    for (long long i = 0; i < grid; ++i) {
      out.push_back(static_cast<double>(i) / fps);
    }
  } else {
    out.reserve(static_cast<std::size_t>(max_frames));
    for (long long i = 0; i < max_frames; ++i) {
      const long long idx = i * grid / max_frames;
      out.push_back(static_cast<double>(idx) / fps);
    }
  }
  return out;
}

PromptRequest build_questioner_prompt(const VideoContext& video,
                                      const SamplingPolicy& policy,
                                      int sample_count, std::uint64_t seed) {
  if (!video.valid()) {
    throw Error(ErrorCode::kInvalidArgument,
                "questioner prompt requires a valid video");
  }
  const std::string duration = format_seconds(video.duration_s);
  std::string body;
  body += "You are shown a video that is " + duration + " seconds long.\n";
  body +=
      "First identify 1 to 4 informative temporal evidence spans, each as "
      "start and end times in seconds within [0, " +
      duration +
      "] with start < end, and describe the event inside each span.\n";
  body +=
      "Then write one multiple-choice question about the video that can only "
      "be answered by watching those spans, four answer options, and the "
      "correct option label.\n";
  body +=
      "Respond with exactly one JSON object and nothing else, shaped as:\n"
      "{\"evidence\": [{\"start\": <seconds>, \"end\": <seconds>, "
      "\"description\": \"<text>\"}], \"question\": \"<text>\", \"options\": "
      "[\"<text>\", \"<text>\", \"<text>\", \"<text>\"], \"answer\": "
      "\"<A|B|C|D>\"}";

  PromptRequest req;
  req.role = Role::kQuestioner;
  req.video = video;
  req.frame_timestamps =
      sample_frames(video.duration_s, policy.fps, policy.max_frames);
  req.body = std::move(body);
  req.sample_count = sample_count;
  req.temperature = policy.temperature;
  req.seed = seed;
  req.context_id = video.id;
  return req;
}

PromptRequest build_solver_prompt(const SupervisionUnit& unit, bool with_video,
                                  const SamplingPolicy& policy,
                                  int sample_count, std::uint64_t seed) {
  std::string body;
  if (with_video) {
    body += "Answer the question using the provided video frames.\n";
  } else {
    body += "No video is available. Answer the question from text alone.\n";
  }
  body += "Question: " + unit.question + "\n";
  body += "Options:\n";
  for (int i = 0; i < kOptionCount; ++i) {
    body += std::string(1, static_cast<char>('A' + i)) + ". " +
            unit.options[static_cast<std::size_t>(i)] + "\n";
  }
  body +=
      "Reply with your final answer as <answer>X</answer> where X is A, B, C, "
      "or D, followed by the time span in seconds that supports it as "
      "<span>start,end</span>.";

  PromptRequest req;
  req.role = Role::kSolver;
  if (with_video) {
    req.video = unit.video;
    req.frame_timestamps =
        sample_frames(unit.video.duration_s, policy.fps, policy.max_frames);
  }
  req.body = std::move(body);
  req.sample_count = sample_count;
  req.temperature = policy.temperature;
  req.seed = seed;
  req.context_id = unit.unit_id;
  return req;
}

}  // namespace evz
