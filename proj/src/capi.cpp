#include "evicoevo/evicoevo.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <memory>
#include <new>
#include <string>

#include "config.hpp"
#include "eval_analysis.hpp"
#include "orchestrator.hpp"
#include "solver_training.hpp"
#include "timeline.hpp"
#include "util.hpp"

struct evz_engine {
  std::unique_ptr<evz::Engine> impl;
};

namespace {

thread_local std::string t_last_error;

evz_status status_from_code(evz::ErrorCode code) {
  using evz::ErrorCode;
  switch (code) {
    case ErrorCode::kInvalidArgument: return EVZ_ERR_INVALID_ARGUMENT;
    case ErrorCode::kIo: return EVZ_ERR_IO;
    case ErrorCode::kParse: return EVZ_ERR_PARSE;
    case ErrorCode::kBackend: return EVZ_ERR_BACKEND;
    case ErrorCode::kProtocol: return EVZ_ERR_PROTOCOL;
    case ErrorCode::kLocked: return EVZ_ERR_LOCKED;
    case ErrorCode::kState: return EVZ_ERR_STATE;
    case ErrorCode::kNoValidRollouts: return EVZ_ERR_NO_VALID_ROLLOUTS;
    case ErrorCode::kEmptyInput: return EVZ_ERR_EMPTY_INPUT;
  }
  return EVZ_ERR_UNKNOWN;
}

template <typename Fn>
evz_status guarded(Fn&& fn) {
  try {
    fn();
    t_last_error.clear();
    return EVZ_OK;
  } catch (const evz::Error& e) {
    t_last_error = e.what();
    return status_from_code(e.code());
  } catch (const std::exception& e) {
    t_last_error = e.what();
    return EVZ_ERR_UNKNOWN;
  } catch (...) {
    t_last_error = "unknown failure";
    return EVZ_ERR_UNKNOWN;
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

evz_status require(bool ok, const char* what) {
  if (ok) return EVZ_OK;
  t_last_error = what;
  return EVZ_ERR_INVALID_ARGUMENT;
}

evz::TimeSpan make_span_or_throw(double start, double end, const char* name) {
  const auto span = evz::TimeSpan::make(start, end);
  if (!span) {
    throw evz::Error(evz::ErrorCode::kInvalidArgument,
                     std::string(name) + " is not a valid span");
  }
  return *span;
}

evz::EngineConfig build_config(const char* config_path,
                               const char* const* overrides,
                               size_t n_overrides) {
  evz::EngineConfig config;
  if (config_path && *config_path) {
    config = evz::load_config(config_path);
  }
  for (size_t i = 0; i < n_overrides; ++i) {
    if (overrides && overrides[i]) {
      evz::apply_override(config, overrides[i]);
    }
  }
  return config;
}

}  // namespace

extern "C" {

const char* evz_version(void) { return "0.1.0"; }

const char* evz_status_name(evz_status status) {
  switch (status) {
    case EVZ_OK: return "ok";
    case EVZ_ERR_INVALID_ARGUMENT: return "invalid-argument";
    case EVZ_ERR_IO: return "io";
    case EVZ_ERR_PARSE: return "parse";
    case EVZ_ERR_BACKEND: return "backend";
    case EVZ_ERR_PROTOCOL: return "protocol";
    case EVZ_ERR_LOCKED: return "locked";
    case EVZ_ERR_STATE: return "state";
    case EVZ_ERR_NO_VALID_ROLLOUTS: return "no-valid-rollouts";
    case EVZ_ERR_EMPTY_INPUT: return "empty-input";
    case EVZ_ERR_UNKNOWN: return "unknown";
  }
  return "unknown";
}

const char* evz_last_error(void) { return t_last_error.c_str(); }

void evz_string_free(char* s) { ::free(s); }

evz_status evz_tiou(double a_start, double a_end, double b_start, double b_end,
                    double* out) {
  if (auto bad = require(out != nullptr, "out is null")) return bad;
  return guarded([&] {
    const auto a = make_span_or_throw(a_start, a_end, "span a");
    const auto b = make_span_or_throw(b_start, b_end, "span b");
    *out = evz::tiou(a, b);
  });
}

evz_status evz_alignment_reward(double pred_start, double pred_end,
                                double target_start, double target_end,
                                double duration_s, double* out) {
  if (auto bad = require(out != nullptr, "out is null")) return bad;
  return guarded([&] {
    const auto pred = make_span_or_throw(pred_start, pred_end, "pred span");
    const auto target =
        make_span_or_throw(target_start, target_end, "target span");
    *out = evz::alignment_reward(pred, target, duration_s);
  });
}

evz_status evz_median_consensus(const double* spans, size_t n_spans,
                                double* out_start, double* out_end,
                                int* out_has) {
  if (auto bad = require(out_start && out_end && out_has, "out is null")) {
    return bad;
  }
  if (auto bad = require(spans != nullptr || n_spans == 0, "spans is null")) {
    return bad;
  }
  return guarded([&] {
    std::vector<evz::TimeSpan> parsed;
    parsed.reserve(n_spans);
    for (size_t i = 0; i < n_spans; ++i) {
      parsed.push_back(
          make_span_or_throw(spans[2 * i], spans[2 * i + 1], "span"));
    }
    const auto consensus =
        evz::median_consensus(std::span<const evz::TimeSpan>(parsed));
    if (consensus) {
      *out_start = consensus->start();
      *out_end = consensus->end();
      *out_has = 1;
    } else {
      *out_start = 0.0;
      *out_end = 0.0;
      *out_has = 0;
    }
  });
}

evz_status evz_sample_frames(double duration_s, double fps, int max_frames,
                             double* out_timestamps, size_t cap,
                             size_t* out_count) {
  if (auto bad = require(out_count != nullptr, "out_count is null")) return bad;
  return guarded([&] {
    const auto frames = evz::sample_frames(duration_s, fps, max_frames);
    *out_count = frames.size();
    if (out_timestamps) {
      const size_t n = std::min(cap, frames.size());
      for (size_t i = 0; i < n; ++i) out_timestamps[i] = frames[i];
    }
  });
}

evz_status evz_group_advantages(const double* rewards, size_t n, double eps,
                                double* out_advantages, double* out_mean,
                                double* out_std) {
  if (auto bad = require(rewards && out_advantages, "rewards/out is null")) {
    return bad;
  }
  return guarded([&] {
    const auto group =
        evz::group_advantages(std::span<const double>(rewards, n), eps);
    for (size_t i = 0; i < n; ++i) out_advantages[i] = group.advantages[i];
    if (out_mean) *out_mean = group.mean;
    if (out_std) *out_std = group.stddev;
  });
}

evz_status evz_dependency_gap(double with_acc, double without_acc,
                              double* out) {
  if (auto bad = require(out != nullptr, "out is null")) return bad;
  *out = evz::dependency_gap(with_acc, without_acc);
  t_last_error.clear();
  return EVZ_OK;
}

evz_status evz_key_span_metrics(double acc_full, double acc_key,
                                double acc_mask, double acc_rand,
                                double* out_necessity,
                                double* out_specificity) {
  if (auto bad = require(out_necessity && out_specificity, "out is null")) {
    return bad;
  }
  const auto m = evz::key_span_metrics(acc_full, acc_key, acc_mask, acc_rand);
  *out_necessity = m.necessity;
  *out_specificity = m.specificity;
  t_last_error.clear();
  return EVZ_OK;
}

evz_status evz_engine_open(const char* config_path,
                           const char* const* overrides, size_t n_overrides,
                           evz_engine** out) {
  if (auto bad = require(out != nullptr, "out is null")) return bad;
  *out = nullptr;
  return guarded([&] {
    auto config = build_config(config_path, overrides, n_overrides);
    *out = new evz_engine{std::make_unique<evz::Engine>(std::move(config))};
  });
}

void evz_engine_close(evz_engine* engine) { delete engine; }

evz_status evz_engine_iterate(evz_engine* engine, int iterations,
                              const char* stop_after_phase) {
  if (auto bad = require(engine != nullptr, "engine is null")) return bad;
  return guarded([&] {
    std::optional<evz::Phase> stop_after;
    if (stop_after_phase && *stop_after_phase) {
      stop_after = evz::phase_from_string(stop_after_phase);
      if (!stop_after || *stop_after == evz::Phase::kDone) {
        throw evz::Error(evz::ErrorCode::kInvalidArgument,
                         std::string("unknown phase: ") + stop_after_phase);
      }
    }
    const int total =
        iterations < 0 ? engine->impl->config().iterations : iterations;
    engine->impl->run(total, stop_after);
  });
}

evz_status evz_engine_run_phase(evz_engine* engine, const char* phase) {
  if (auto bad = require(engine && phase, "engine/phase is null")) return bad;
  return guarded([&] { engine->impl->run_named_phase(phase); });
}

evz_status evz_engine_state_json(evz_engine* engine, char** out_json) {
  if (auto bad = require(engine && out_json, "engine/out is null")) return bad;
  return guarded(
      [&] { *out_json = dup_string(evz::state_to_json(engine->impl->state())); });
}

evz_status evz_evaluate_files(const char* predictions_path,
                              const char* ground_truth_path,
                              char** out_json_report) {
  if (auto bad = require(predictions_path && ground_truth_path &&
                             out_json_report,
                         "path/out is null")) {
    return bad;
  }
  return guarded([&] {
    *out_json_report =
        dup_string(evz::evaluate_files(predictions_path, ground_truth_path).json);
  });
}

evz_status evz_evidence_plan(const char* annotations_path, const char* out_dir,
                             uint64_t seed, double fps, int max_frames,
                             char** out_json_summary) {
  if (auto bad = require(annotations_path && out_dir && out_json_summary,
                         "path/out is null")) {
    return bad;
  }
  return guarded([&] {
    *out_json_summary = dup_string(evz::evidence_plan_files(
        annotations_path, out_dir, seed, fps, max_frames));
  });
}

evz_status evz_evidence_report(const char* annotations_path,
                               const char* pred_full, const char* pred_key,
                               const char* pred_mask, const char* pred_rand,
                               char** out_json_report) {
  if (auto bad = require(annotations_path && pred_full && pred_key &&
                             pred_mask && pred_rand && out_json_report,
                         "path/out is null")) {
    return bad;
  }
  return guarded([&] {
    *out_json_report = dup_string(evz::evidence_report_files(
        annotations_path, pred_full, pred_key, pred_mask, pred_rand));
  });
}

evz_status evz_config_dump(const char* config_path,
                           const char* const* overrides, size_t n_overrides,
                           char** out_text) {
  if (auto bad = require(out_text != nullptr, "out is null")) return bad;
  return guarded([&] {
    const auto config = build_config(config_path, overrides, n_overrides);
    *out_text = dup_string(evz::dump_config(config));
  });
}

}  // extern "C"
