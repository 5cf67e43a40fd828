#include "config.hpp"

#include "doctest.h"
#include "support/fixtures.hpp"
#include "util.hpp"

using namespace evz;

TEST_CASE("defaults carry the training constants") {
  const EngineConfig c;
  CHECK(c.iterations == 5);
  CHECK(c.videos_per_iter == 600);
  CHECK(c.m_rollouts == 10);
  CHECK(c.n_pseudo == 10);
  CHECK(c.gate.s_min == 0.3);
  CHECK(c.gate.s_max == 0.8);
  CHECK(c.alpha == 0.5);
  CHECK(c.fps == 2.0);
  CHECK(c.max_frames == 32);
  CHECK(c.group_size_questioner == 4);
  CHECK(c.group_size_solver == 5);
  CHECK(c.learning_rate == 1e-6);
  CHECK(c.kl_coefficient == 0.01);
  CHECK(c.heuristics.format_bonus == 0.1);
  CHECK(c.heuristics.w_learn == 0.5);
  CHECK(c.heuristics.w_dep == 0.3);
  CHECK(c.heuristics.evid_clip_hi == 0.3);
  CHECK(c.heuristics.easy_threshold == 0.9);
}

TEST_CASE("dump -> load round trip") {
  EngineConfig c;
  c.video_manifest_path = "/data/manifest.jsonl";
  c.iterations = 2;
  c.seed = 424242;
  c.backend.kind = BackendConfig::Kind::kScripted;
  c.backend.script_path = "/data/script.jsonl";
  c.heuristics.event_keywords = {"kick", "wave"};

  test::TempDir dir("config");
  const auto path = dir.path / "engine.ini";
  write_text_file_atomic(path, dump_config(c));
  const EngineConfig loaded = load_config(path);
  CHECK(loaded.video_manifest_path == c.video_manifest_path);
  CHECK(loaded.iterations == 2);
  CHECK(loaded.seed == 424242);
  CHECK(loaded.backend.kind == BackendConfig::Kind::kScripted);
  CHECK(loaded.backend.script_path == c.backend.script_path);
  CHECK(loaded.heuristics.event_keywords == c.heuristics.event_keywords);
  CHECK(dump_config(loaded) == dump_config(c));
}

TEST_CASE("comments, sections, and overrides") {
  test::TempDir dir("config2");
  const auto path = dir.path / "engine.ini";
  write_text_file_atomic(path,
                         "# engine settings\n"
                         "[engine]\n"
                         "iterations = 3\n"
                         "; also a comment\n"
                         "alpha = 0.25\n"
                         "[backend]\n"
                         "kind = scripted\n"
                         "script_path = s.jsonl\n");
  EngineConfig c = load_config(path);
  CHECK(c.iterations == 3);
  CHECK(c.alpha == 0.25);
  CHECK(c.backend.kind == BackendConfig::Kind::kScripted);

  apply_override(c, "engine.seed=9");
  CHECK(c.seed == 9);
  apply_override(c, "iterations=7");  // bare keys hit the engine section
  CHECK(c.iterations == 7);
  apply_override(c, "heuristics.format_bonus=0.2");
  CHECK(c.heuristics.format_bonus == 0.2);
  CHECK_THROWS_AS(apply_override(c, "engine.not_a_key=1"), Error);
  CHECK_THROWS_AS(apply_override(c, "no_equals_sign"), Error);
}

TEST_CASE("bad values and unknown keys are rejected") {
  test::TempDir dir("config3");
  const auto path = dir.path / "engine.ini";
  write_text_file_atomic(path, "[engine]\nmystery_knob = 1\n");
  CHECK_THROWS_AS(load_config(path), Error);
  write_text_file_atomic(path, "[engine]\niterations = banana\n");
  CHECK_THROWS_AS(load_config(path), Error);
  write_text_file_atomic(path, "[weird]\nkey = 1\n");
  CHECK_THROWS_AS(load_config(path), Error);
}

TEST_CASE("validate_config enforces structural requirements") {
  EngineConfig c;
  c.backend.kind = BackendConfig::Kind::kScripted;
  c.backend.script_path = "s.jsonl";
  CHECK_NOTHROW(validate_config(c));

  EngineConfig bad_gate = c;
  bad_gate.gate.s_min = 0.9;
  CHECK_THROWS_AS(validate_config(bad_gate), Error);

  EngineConfig http = c;
  http.backend.kind = BackendConfig::Kind::kHttp;
  http.backend.endpoint_url = "";
  http.backend.model_name = "";
  CHECK_THROWS_AS(validate_config(http), Error);

  EngineConfig bad_counts = c;
  bad_counts.n_pseudo = 0;
  CHECK_THROWS_AS(validate_config(bad_counts), Error);
}
