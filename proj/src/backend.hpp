#pragma once

#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "protocol.hpp"
#include "timeline.hpp"

namespace evz {

enum class Role { kQuestioner, kSolver };

const char* to_string(Role role);

struct PromptRequest {
  Role role = Role::kSolver;
  std::optional<VideoContext> video;     // absent = without-video condition
  std::vector<double> frame_timestamps;  // empty when no video
  std::string body;
  int sample_count = 1;
  double temperature = 1.0;
  std::uint64_t seed = 0;
  std::string context_id;  // unit or video identity; part of the fingerprint
};

// Stable per-request identity over (role, video id or "novideo", context id,
// body, seed). Scripted lookup, caching, and retry idempotency key on it;
// the sample index selects within the response list.
std::string fingerprint(const PromptRequest& request);

struct BackendConfig {
  enum class Kind { kHttp, kScripted };
  Kind kind = Kind::kHttp;
  std::string endpoint_url;
  std::string model_name;
  std::string script_path;
  int max_parallel = 4;
  int retry_limit = 3;
  double timeout_s = 30.0;
  double temperature = 1.0;
};

const char* to_string(BackendConfig::Kind kind);
std::optional<BackendConfig::Kind> backend_kind_from_string(std::string_view s);

// Bounds concurrent backend calls and records the high-water mark.
class ConcurrencyLimiter {
 public:
  explicit ConcurrencyLimiter(int max_parallel);

  class Slot {
   public:
    explicit Slot(ConcurrencyLimiter& limiter);
    ~Slot();
    Slot(const Slot&) = delete;
    Slot& operator=(const Slot&) = delete;

   private:
    ConcurrencyLimiter& limiter_;
  };

  int peak() const;

 private:
  friend class Slot;
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  int available_;
  int inflight_ = 0;
  int peak_ = 0;
};

class Backend {
 public:
  virtual ~Backend() = default;
  // Returns exactly request.sample_count response texts or throws.
  virtual std::vector<std::string> complete(const PromptRequest& request) = 0;
  // High-water mark of concurrent complete() calls.
  virtual int peak_concurrency() const = 0;
};

// Script file: JSON-Lines {"fingerprint": str, "responses": [str, ...]}.
// Response for sample i is responses[i % responses.size()]; output is a pure
// function of (script content, fingerprint, sample index).
class ScriptedBackend : public Backend {
 public:
  ScriptedBackend(const std::string& script_path, int max_parallel);
  std::vector<std::string> complete(const PromptRequest& request) override;
  int peak_concurrency() const override { return limiter_.peak(); }
  void set_test_delay_ms(int ms) { test_delay_ms_ = ms; }

 private:
  std::unordered_map<std::string, std::vector<std::string>> records_;
  ConcurrencyLimiter limiter_;
  int test_delay_ms_ = 0;
};

std::unique_ptr<Backend> make_backend(const BackendConfig& config);

// In-memory per-iteration response cache keyed by fingerprint. A request for
// fewer samples than already cached is served as a prefix.
class RolloutCache {
 public:
  std::vector<std::string> complete(Backend& backend,
                                    const PromptRequest& request);
  void clear();

 private:
  std::mutex mutex_;
  std::unordered_map<std::string, std::vector<std::string>> by_fingerprint_;
};

// Runs all requests (optionally through a cache) on up to max_parallel worker
// threads; results keep request order. The first failure by request index is
// rethrown after all workers finish.
std::vector<std::vector<std::string>> complete_all(
    Backend& backend, RolloutCache* cache,
    std::span<const PromptRequest> requests, int max_parallel);

struct SamplingPolicy {
  double fps = 2.0;
  int max_frames = 32;
  double temperature = 1.0;
};

// Timestamps at 1/fps spacing from 0, all strictly below duration_s. When the
// grid exceeds max_frames, frames are uniformly re-indexed down to exactly
// max_frames. Throws on non-positive duration, fps, or max_frames.
std::vector<double> sample_frames(double duration_s, double fps,
                                  int max_frames);

// Instructs the questioner JSON wire schema; evidence spans come before the
// question and answer. Requires a valid video.
PromptRequest build_questioner_prompt(const VideoContext& video,
                                      const SamplingPolicy& policy,
                                      int sample_count, std::uint64_t seed);

// Embeds question, options, and the <answer>/<span> output format; the video
// (and its sampled frame timestamps) is attached iff with_video.
PromptRequest build_solver_prompt(const SupervisionUnit& unit, bool with_video,
                                  const SamplingPolicy& policy,
                                  int sample_count, std::uint64_t seed);

}  // namespace evz
