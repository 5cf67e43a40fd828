// evicoevo command-line front end. Everything goes through the public C API
// of libevicoevo; this translation unit never touches internal headers.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "evicoevo/evicoevo.h"

namespace {

struct GlobalOptions {
  std::string config_path;
  std::string output_dir;
  std::string backend_kind;
  std::string seed;
  std::vector<std::string> sets;  // section.key=value

  std::vector<std::string> overrides() const {
    std::vector<std::string> out;
    if (!seed.empty()) out.push_back("engine.seed=" + seed);
    if (!output_dir.empty()) out.push_back("engine.output_dir=" + output_dir);
    if (!backend_kind.empty()) out.push_back("backend.kind=" + backend_kind);
    for (const std::string& s : sets) out.push_back(s);
    return out;
  }
};

std::vector<const char*> to_argv(const std::vector<std::string>& items) {
  std::vector<const char*> out;
  out.reserve(items.size());
  for (const std::string& s : items) out.push_back(s.c_str());
  return out;
}

int fail(evz_status status) {
  std::cerr << "error (" << evz_status_name(status) << "): " << evz_last_error()
            << "\n";
  return 1;
}

struct EngineHandle {
  evz_engine* engine = nullptr;
  ~EngineHandle() { evz_engine_close(engine); }
};

int open_engine(const GlobalOptions& global, EngineHandle& handle) {
  const auto overrides = global.overrides();
  const auto argv = to_argv(overrides);
  const evz_status st = evz_engine_open(
      global.config_path.empty() ? nullptr : global.config_path.c_str(),
      argv.data(), argv.size(), &handle.engine);
  if (st != EVZ_OK) return fail(st);
  return 0;
}

void print_state(evz_engine* engine) {
  char* json = nullptr;
  if (evz_engine_state_json(engine, &json) == EVZ_OK) {
    std::cout << json << "\n";
    evz_string_free(json);
  }
}

int emit_report(const char* json, const std::string& out_path) {
  if (!out_path.empty()) {
    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    if (!out) {
      std::cerr << "error: cannot write " << out_path << "\n";
      return 1;
    }
    out << json << "\n";
  } else {
    std::cout << json << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"evidence-grounded questioner/solver co-evolution engine"};
  app.require_subcommand(1);

  GlobalOptions global;
  app.add_option("--config", global.config_path, "engine config file (INI)");
  app.add_option("--seed", global.seed, "override engine.seed");
  app.add_option("--output-dir", global.output_dir, "override engine.output_dir");
  app.add_option("--backend", global.backend_kind,
                 "override backend.kind (http|scripted)");
  app.add_option("--set", global.sets,
                 "override any config key as section.key=value")
      ->take_all();

  // Every config key is also a flag of the same name.
  struct KeyFlag {
    const char* key;  // section.key
    std::string value;
  };
  static KeyFlag key_flags[] = {
      {"engine.video_manifest"}, {"engine.iterations"},
      {"engine.videos_per_iter"}, {"engine.m_rollouts"},
      {"engine.n_pseudo"}, {"engine.gate_min"}, {"engine.gate_max"},
      {"engine.alpha"}, {"engine.fps"}, {"engine.max_frames"},
      {"engine.units_per_video"}, {"engine.group_size_questioner"},
      {"engine.group_size_solver"}, {"engine.learning_rate"},
      {"engine.kl_coefficient"}, {"engine.advantage_eps"},
      {"engine.fresh_pseudo_rollouts"}, {"backend.endpoint_url"},
      {"backend.model_name"}, {"backend.script_path"},
      {"backend.max_parallel"}, {"backend.retry_limit"},
      {"backend.timeout_s"}, {"backend.temperature"},
      {"heuristics.format_bonus"}, {"heuristics.w_learn"},
      {"heuristics.w_dep"}, {"heuristics.evid_clip_lo"},
      {"heuristics.evid_clip_hi"},
      {"heuristics.coverage_suppression_threshold"},
      {"heuristics.easy_threshold"}, {"heuristics.easy_penalty"},
      {"heuristics.event_keywords"}, {"heuristics.temporal_keywords"},
  };
  for (KeyFlag& kf : key_flags) {
    const std::string key(kf.key);
    const std::string flag = "--" + key.substr(key.find('.') + 1);
    app.add_option(flag, kf.value, "override " + key);
  }

  // iterate
  auto* iterate = app.add_subcommand(
      "iterate", "run co-evolution iterations (resumes from state.json)");
  int iterations = -1;
  std::string stop_after;
  iterate->add_option("--iterations", iterations,
                      "total completed iterations to reach (default: config)");
  iterate->add_option("--stop-after", stop_after,
                      "stop once this phase finishes");

  // single-phase subcommands
  struct PhaseCommand {
    const char* name;
    const char* phase;
    const char* help;
  };
  const PhaseCommand phase_commands[] = {
      {"score-questions", "questioner-opt",
       "score questioner candidates and emit the questioner batch"},
      {"generate", "data-gen", "generate dataset candidates"},
      {"pseudo-label", "pseudo-label",
       "derive pseudo labels, apply the gate, write the dataset"},
      {"solver-score", "solver-score", "score solver rollouts on the dataset"},
      {"emit-batch", "batch-emit", "emit the solver training batch"},
  };
  for (const PhaseCommand& pc : phase_commands) {
    app.add_subcommand(pc.name, pc.help);
  }

  // evaluate
  auto* evaluate = app.add_subcommand(
      "evaluate", "grounding/GQA metrics for predictions vs ground truth");
  std::string pred_path;
  std::string gt_path;
  std::string out_path;
  evaluate->add_option("--pred", pred_path, "predictions JSONL")->required();
  evaluate->add_option("--gt", gt_path, "ground-truth JSONL")->required();
  evaluate->add_option("--out", out_path, "write the JSON report here");

  // analyze-evidence
  auto* analyze = app.add_subcommand(
      "analyze-evidence",
      "frame-condition plans and key-span necessity/specificity");
  std::string annotations_path;
  std::string plan_dir;
  std::string pred_full;
  std::string pred_key;
  std::string pred_mask;
  std::string pred_rand;
  std::string analyze_out;
  std::uint64_t analyze_seed = 0;
  double analyze_fps = 2.0;
  int analyze_max_frames = 32;
  analyze->add_option("--annotations", annotations_path,
                      "oracle annotations JSONL")->required();
  analyze->add_option("--plan-dir", plan_dir,
                      "emit condition plans into this directory");
  analyze->add_option("--pred-full", pred_full, "full-condition predictions");
  analyze->add_option("--pred-key", pred_key, "only-key predictions");
  analyze->add_option("--pred-mask", pred_mask, "mask-key predictions");
  analyze->add_option("--pred-rand", pred_rand, "random-span predictions");
  analyze->add_option("--out", analyze_out, "write the JSON report here");
  analyze->add_option("--plan-seed", analyze_seed, "random-span placement seed");
  analyze->add_option("--fps", analyze_fps, "frame sampling rate");
  analyze->add_option("--max-frames", analyze_max_frames, "frame budget");

  // config
  auto* config_cmd = app.add_subcommand("config", "inspect configuration");
  bool dump = false;
  config_cmd->add_flag("--dump", dump, "print the effective configuration");

  CLI11_PARSE(app, argc, argv);

  for (const KeyFlag& kf : key_flags) {
    const std::string key(kf.key);
    if (app.count("--" + key.substr(key.find('.') + 1)) > 0) {
      global.sets.push_back(key + "=" + kf.value);
    }
  }

  if (iterate->parsed()) {
    EngineHandle handle;
    if (int rc = open_engine(global, handle)) return rc;
    const evz_status st = evz_engine_iterate(
        handle.engine, iterations, stop_after.empty() ? nullptr : stop_after.c_str());
    if (st != EVZ_OK) return fail(st);
    print_state(handle.engine);
    return 0;
  }

  for (const PhaseCommand& pc : phase_commands) {
    if (app.get_subcommand(pc.name)->parsed()) {
      EngineHandle handle;
      if (int rc = open_engine(global, handle)) return rc;
      const evz_status st = evz_engine_run_phase(handle.engine, pc.phase);
      if (st != EVZ_OK) return fail(st);
      print_state(handle.engine);
      return 0;
    }
  }

  if (evaluate->parsed()) {
    char* report = nullptr;
    const evz_status st =
        evz_evaluate_files(pred_path.c_str(), gt_path.c_str(), &report);
    if (st != EVZ_OK) return fail(st);
    const int rc = emit_report(report, out_path);
    evz_string_free(report);
    return rc;
  }

  if (analyze->parsed()) {
    const bool has_preds = !pred_full.empty() || !pred_key.empty() ||
                           !pred_mask.empty() || !pred_rand.empty();
    if (!plan_dir.empty()) {
      char* summary = nullptr;
      const evz_status st =
          evz_evidence_plan(annotations_path.c_str(), plan_dir.c_str(),
                            analyze_seed, analyze_fps, analyze_max_frames,
                            &summary);
      if (st != EVZ_OK) return fail(st);
      std::cout << summary << "\n";
      evz_string_free(summary);
    }
    if (has_preds) {
      if (pred_full.empty() || pred_key.empty() || pred_mask.empty() ||
          pred_rand.empty()) {
        std::cerr << "error: all four --pred-* files are required for the "
                     "necessity/specificity report\n";
        return 1;
      }
      char* report = nullptr;
      const evz_status st = evz_evidence_report(
          annotations_path.c_str(), pred_full.c_str(), pred_key.c_str(),
          pred_mask.c_str(), pred_rand.c_str(), &report);
      if (st != EVZ_OK) return fail(st);
      const int rc = emit_report(report, analyze_out);
      evz_string_free(report);
      return rc;
    }
    if (plan_dir.empty()) {
      std::cerr << "error: pass --plan-dir and/or the four --pred-* files\n";
      return 1;
    }
    return 0;
  }

  if (config_cmd->parsed()) {
    if (!dump) {
      std::cerr << "error: config currently supports --dump\n";
      return 1;
    }
    const auto overrides = global.overrides();
    const auto argv_over = to_argv(overrides);
    char* text = nullptr;
    const evz_status st = evz_config_dump(
        global.config_path.empty() ? nullptr : global.config_path.c_str(),
        argv_over.data(), argv_over.size(), &text);
    if (st != EVZ_OK) return fail(st);
    std::cout << text;
    evz_string_free(text);
    return 0;
  }

  return 0;
}
