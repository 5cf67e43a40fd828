// Shell-level exercises of the evicoevo binary: subcommand wiring, exit
// codes, and the file tools.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <string>

#include "config.hpp"
#include "json.hpp"
#include "orchestrator.hpp"
#include "support/fixtures.hpp"
#include "util.hpp"

#ifndef EVICOEVO_CLI_PATH
#error "EVICOEVO_CLI_PATH must point at the CLI binary"
#endif

using namespace evz;
using evz::test::TempDir;

namespace {

using Json = nlohmann::ordered_json;

const std::string kCli = EVICOEVO_CLI_PATH;

std::string engine_args(const test::PipelineFixture& fixture,
                        const std::filesystem::path& out) {
  return " --backend scripted --seed 7 --output-dir " + out.string() +
         " --set engine.video_manifest=" + fixture.manifest_path.string() +
         " --set backend.script_path=" + fixture.script_path.string() +
         " --set engine.videos_per_iter=3";
}

}  // namespace

TEST_CASE("phase subcommands walk the state machine in order") {
  TempDir dir("cli_phases");
  const auto fixture = test::build_pipeline_fixture(dir.path, 7, EngineConfig{});
  const auto out = dir.path / "out";
  const std::string base = kCli + engine_args(fixture, out);

  std::string output;
  // Out-of-order phases are state errors.
  CHECK(test::run_command(base + " pseudo-label", &output) != 0);
  CHECK(output.find("state") != std::string::npos);

  for (const char* sub : {"score-questions", "generate", "pseudo-label",
                          "solver-score", "emit-batch"}) {
    CHECK(test::run_command(base + " " + sub, &output) == 0);
  }
  const IterationState state = load_state(out / "state.json");
  CHECK(state.iteration == 1);
  CHECK(state.phase == Phase::kDone);
  CHECK(std::filesystem::exists(out / "iter1" / "solver_batch.jsonl"));

  // The stepped pipeline matches a single iterate run byte for byte.
  const auto out2 = dir.path / "out2";
  CHECK(test::run_command(kCli + engine_args(fixture, out2) +
                              " iterate --iterations 1",
                          &output) == 0);
  for (const char* name : {"dataset.jsonl", "questioner_batch.jsonl",
                           "solver_batch.jsonl"}) {
    CHECK(read_text_file(out / "iter1" / name) ==
          read_text_file(out2 / "iter1" / name));
  }
}

TEST_CASE("iterate with zero iterations writes nothing") {
  TempDir dir("cli_zero");
  const auto fixture = test::build_pipeline_fixture(dir.path, 7, EngineConfig{});
  const auto out = dir.path / "out";
  std::string output;
  CHECK(test::run_command(kCli + engine_args(fixture, out) +
                              " iterate --iterations 0",
                          &output) == 0);
  CHECK_FALSE(std::filesystem::exists(out / "state.json"));
  CHECK_FALSE(std::filesystem::exists(out / "iter1"));
}

TEST_CASE("a held lock makes the engine refuse with a locked error") {
  TempDir dir("cli_lock");
  const auto fixture = test::build_pipeline_fixture(dir.path, 7, EngineConfig{});
  const auto out = dir.path / "out";
  std::filesystem::create_directories(out);
  write_text_file_atomic(out / ".lock", std::to_string(::getpid()));
  std::string output;
  CHECK(test::run_command(kCli + engine_args(fixture, out) +
                              " iterate --iterations 1",
                          &output) != 0);
  CHECK(output.find("locked") != std::string::npos);
}

TEST_CASE("bad configuration fails fast") {
  std::string output;
  CHECK(test::run_command(kCli + " --backend scripted iterate", &output) != 0);
  CHECK(output.find("script_path") != std::string::npos);
  CHECK(test::run_command(kCli + " --set engine.bogus=1 config --dump",
                          &output) != 0);
}

TEST_CASE("evaluate subcommand") {
  TempDir dir("cli_eval");
  write_text_file_atomic(
      dir.path / "pred.jsonl",
      "{\"question_id\": \"q1\", \"answer\": \"A\", \"span\": [2.0, 6.0]}\n");
  write_text_file_atomic(dir.path / "gt.jsonl",
                         "{\"question_id\": \"q1\", \"answer\": \"A\", "
                         "\"span\": [2.0, 6.0], \"duration_s\": 10.0}\n");
  std::string output;
  CHECK(test::run_command(kCli + " evaluate --pred " +
                              (dir.path / "pred.jsonl").string() + " --gt " +
                              (dir.path / "gt.jsonl").string(),
                          &output) == 0);
  const Json report = Json::parse(output);
  CHECK(report.at("mIoU").get<double>() == 100.0);
  CHECK(report.at("GQA@0.5").get<double>() == 100.0);

  const auto out_path = dir.path / "report.json";
  CHECK(test::run_command(kCli + " evaluate --pred " +
                              (dir.path / "pred.jsonl").string() + " --gt " +
                              (dir.path / "gt.jsonl").string() + " --out " +
                              out_path.string(),
                          &output) == 0);
  CHECK(std::filesystem::exists(out_path));
}

TEST_CASE("analyze-evidence subcommand") {
  TempDir dir("cli_evidence");
  write_text_file_atomic(dir.path / "ann.jsonl",
                         "{\"question_id\": \"q1\", \"ref_answer\": \"A\", "
                         "\"key_span\": [4.0, 6.0], \"duration_s\": 10.0}\n");
  auto preds = [&](const std::string& name, const char* answer) {
    const auto path = dir.path / name;
    write_text_file_atomic(path, std::string("{\"question_id\": \"q1\", "
                                             "\"answer\": \"") +
                                     answer + "\"}\n");
    return path.string();
  };

  std::string output;
  CHECK(test::run_command(kCli + " analyze-evidence --annotations " +
                              (dir.path / "ann.jsonl").string() +
                              " --plan-dir " + (dir.path / "plans").string() +
                              " --plan-seed 7",
                          &output) == 0);
  CHECK(std::filesystem::exists(dir.path / "plans" / "conditions.jsonl"));
  const Json plan_row =
      Json::parse(read_text_file(dir.path / "plans" / "conditions.jsonl"));
  CHECK(plan_row.at("only_key").size() == 4);  // frames 4.0, 4.5, 5.0, 5.5

  CHECK(test::run_command(
            kCli + " analyze-evidence --annotations " +
                (dir.path / "ann.jsonl").string() + " --pred-full " +
                preds("full.jsonl", "A") + " --pred-key " +
                preds("key.jsonl", "A") + " --pred-mask " +
                preds("mask.jsonl", "B") + " --pred-rand " +
                preds("rand.jsonl", "B"),
            &output) == 0);
  const Json report = Json::parse(output);
  CHECK(report.at("key_necessity").get<double>() == 100.0);
  CHECK(report.at("key_specificity").get<double>() == 100.0);

  // The report needs all four condition files.
  CHECK(test::run_command(kCli + " analyze-evidence --annotations " +
                              (dir.path / "ann.jsonl").string() +
                              " --pred-full " + preds("full.jsonl", "A"),
                          &output) != 0);
}
