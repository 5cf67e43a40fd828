#include "pseudo_supervision.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "doctest.h"
#include "support/fixtures.hpp"
#include "util.hpp"

using namespace evz;

namespace {

RolloutResponse rollout(std::optional<char> answer,
                        std::optional<std::pair<double, double>> span,
                        double duration = 10.0) {
  RolloutResponse r;
  r.raw_text = "fixture";
  if (answer) {
    r.answer = label_from_char(*answer);
    r.valid = true;
  }
  if (span) {
    r.span = TimeSpan::make(span->first, span->second);
    REQUIRE(r.span.has_value());
    REQUIRE(r.span->within(duration));
  }
  return r;
}

SupervisionUnit fixture_unit() {
  return test::make_unit(test::make_video("v", 10.0), "u0", "what happens?");
}

// Brute-force tally-and-sort oracle, independent of the library path.
struct OraclePseudo {
  int label;
  double support;
  bool has_span;
  double start, end;
  bool fallback;
};

OraclePseudo oracle_derive(const std::vector<RolloutResponse>& rollouts,
                           const SupervisionUnit& unit) {
  int counts[4] = {0, 0, 0, 0};
  for (const auto& r : rollouts) {
    if (r.valid && r.answer) counts[static_cast<int>(*r.answer)] += 1;
  }
  int label = 0;
  for (int i = 1; i < 4; ++i) {
    if (counts[i] > counts[label]) label = i;
  }
  OraclePseudo out{};
  out.label = label;
  out.support = double(counts[label]) / double(rollouts.size());
  std::vector<double> starts, ends;
  for (const auto& r : rollouts) {
    if (r.valid && r.answer && static_cast<int>(*r.answer) == label && r.span) {
      starts.push_back(r.span->start());
      ends.push_back(r.span->end());
    }
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  };
  if (!starts.empty()) {
    const double s = median(starts);
    const double e = median(ends);
    if (s < e) {
      out.has_span = true;
      out.start = s;
      out.end = e;
      return out;
    }
  }
  if (!unit.evidence.empty()) {
    out.has_span = true;
    out.fallback = true;
    out.start = unit.evidence.front().span.start();
    out.end = unit.evidence.front().span.end();
  }
  return out;
}

}  // namespace

TEST_CASE("derive_pseudo_label consensus and fallback") {
  const SupervisionUnit unit = fixture_unit();

  SUBCASE("6-of-10 majority with median span") {
    std::vector<RolloutResponse> rollouts = {
        rollout('B', {{4, 8}}), rollout('B', {{5, 9}}), rollout('B', {{4, 7}}),
        rollout('B', {{3, 8}}), rollout('B', {{5, 8}}), rollout('B', {{4, 9}}),
        rollout('A', {{0, 2}}), rollout('A', std::nullopt),
        rollout('A', {{1, 3}}), rollout('A', std::nullopt)};
    const auto label = derive_pseudo_label(rollouts, unit);
    CHECK(label.label == OptionLabel::kB);
    CHECK(label.support == doctest::Approx(0.6));
    CHECK(label.origin == PseudoOrigin::kConsensus);
    REQUIRE(label.span.has_value());
    CHECK(label.span->start() == 4.0);
    CHECK(label.span->end() == 8.0);
  }

  SUBCASE("unanimity") {
    std::vector<RolloutResponse> rollouts(10, rollout('C', {{2, 4}}));
    const auto label = derive_pseudo_label(rollouts, unit);
    CHECK(label.label == OptionLabel::kC);
    CHECK(label.support == 1.0);
    CHECK(label.origin == PseudoOrigin::kConsensus);
    CHECK(label.span->start() == 2.0);
  }

  SUBCASE("no spans among agreeing rollouts falls back to the evidence span") {
    std::vector<RolloutResponse> rollouts = {
        rollout('B', std::nullopt), rollout('B', std::nullopt),
        rollout('B', std::nullopt), rollout('B', std::nullopt),
        rollout(std::nullopt, {}),  rollout(std::nullopt, {}),
        rollout(std::nullopt, {}),  rollout(std::nullopt, {}),
        rollout(std::nullopt, {}),  rollout(std::nullopt, {})};
    const auto label = derive_pseudo_label(rollouts, unit);
    CHECK(label.label == OptionLabel::kB);
    CHECK(label.support == doctest::Approx(0.4));
    CHECK(label.origin == PseudoOrigin::kQuestionerFallback);
    REQUIRE(label.span.has_value());
    CHECK(*label.span == unit.evidence.front().span);
  }

  SUBCASE("all rollouts invalid raises") {
    std::vector<RolloutResponse> rollouts(10, rollout(std::nullopt, {}));
    CHECK_THROWS_AS(derive_pseudo_label(rollouts, unit), Error);
  }

  SUBCASE("support counts over all n rollouts, invalid included") {
    std::vector<RolloutResponse> rollouts(3, rollout('D', std::nullopt));
    rollouts.resize(10, rollout(std::nullopt, {}));
    const auto label = derive_pseudo_label(rollouts, unit);
    CHECK(label.support == doctest::Approx(0.3));
  }
}

TEST_CASE("curriculum gate is inclusive on both ends") {
  const CurriculumGate gate;
  auto with_support = [](double s) {
    PseudoLabel label;
    label.support = s;
    return label;
  };
  CHECK(gate_retains(with_support(0.6), gate));
  CHECK_FALSE(gate_retains(with_support(0.9), gate));
  CHECK(gate_retains(with_support(0.3), gate));
  CHECK(gate_retains(with_support(0.8), gate));
  CHECK_FALSE(gate_retains(with_support(0.2), gate));
  CHECK(gate_retains(with_support(3.0 / 10.0), gate));
  CHECK(gate_retains(with_support(8.0 / 10.0), gate));
}

TEST_CASE("build_dataset filters and orders") {
  const SupervisionUnit unit = fixture_unit();
  auto entry = [&](const std::string& id, int matching) {
    DatasetBuildInput input;
    input.unit = unit;
    input.unit.unit_id = id;
    input.verdict = FormatVerdict::pass();
    for (int i = 0; i < matching; ++i) {
      input.rollouts.push_back(rollout('B', {{4, 8}}));
    }
    // Fill with invalid rollouts so support is exactly matching/10.
    input.rollouts.resize(10);
    input.iteration = 1;
    return input;
  };

  SUBCASE("gate keeps exactly the mid-support records") {
    std::vector<DatasetBuildInput> inputs = {entry("u-a", 6), entry("u-b", 9),
                                             entry("u-c", 2)};
    BuildReport report;
    const auto records = build_dataset(inputs, CurriculumGate{}, &report);
    REQUIRE(records.size() == 1);
    CHECK(records[0].unit.unit_id == "u-a");
    CHECK(report.generated == 3);
    CHECK(report.dropped_gate == 2);
    CHECK(report.retained == 1);
    CHECK(report.generated == report.dropped_format + report.dropped_no_label +
                                  report.dropped_gate + report.retained);
  }

  SUBCASE("empty input gives an empty dataset") {
    BuildReport report;
    CHECK(build_dataset({}, CurriculumGate{}, &report).empty());
    CHECK(report.generated == 0);
  }

  SUBCASE("format failures are dropped regardless of rollouts") {
    auto bad = entry("u-bad", 6);
    bad.verdict = FormatVerdict::fail(FormatFailure::kBadLabel);
    BuildReport report;
    const auto records = build_dataset({bad}, CurriculumGate{}, &report);
    CHECK(records.empty());
    CHECK(report.dropped_format == 1);
  }

  SUBCASE("deterministic order and idempotent serialization") {
    std::vector<DatasetBuildInput> inputs = {entry("u-z", 5), entry("u-a", 5),
                                             entry("u-m", 5)};
    const auto records = build_dataset(inputs, CurriculumGate{});
    REQUIRE(records.size() == 3);
    CHECK(records[0].unit.unit_id == "u-a");
    CHECK(records[2].unit.unit_id == "u-z");

    test::TempDir dir("dataset");
    const auto path_a = dir.path / "a.jsonl";
    const auto path_b = dir.path / "b.jsonl";
    write_dataset_jsonl(path_a, records);
    write_dataset_jsonl(path_b, read_dataset_jsonl(path_a));
    CHECK(read_text_file(path_a) == read_text_file(path_b));
    CHECK(test::hash_file(path_a) == test::hash_file(path_b));
  }
}

TEST_CASE("pseudo-label properties against the oracle") {
  Rng rng(909);
  const SupervisionUnit unit = fixture_unit();
  const CurriculumGate gate;

  int retained = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<RolloutResponse> rollouts;
    for (int i = 0; i < 10; ++i) {
      const int kind = static_cast<int>(rng.bounded(5));
      if (kind == 0) {
        rollouts.push_back(rollout(std::nullopt, {}));
        continue;
      }
      const char answer = static_cast<char>('A' + rng.bounded(4));
      if (kind == 1) {
        rollouts.push_back(rollout(answer, std::nullopt));
      } else {
        const double a = rng.uniform01() * 9.0;
        const double b = a + 0.1 + rng.uniform01() * (9.9 - a);
        rollouts.push_back(rollout(answer, {{a, b}}));
      }
    }

    bool all_invalid = true;
    for (const auto& r : rollouts) all_invalid &= !r.valid;
    if (all_invalid) {
      CHECK_THROWS_AS(derive_pseudo_label(rollouts, unit), Error);
      continue;
    }

    const auto label = derive_pseudo_label(rollouts, unit);
    const auto oracle = oracle_derive(rollouts, unit);
    CHECK(static_cast<int>(label.label) == oracle.label);
    CHECK(label.support == oracle.support);
    REQUIRE(label.span.has_value() == oracle.has_span);
    if (oracle.has_span) {
      CHECK(label.span->start() == oracle.start);
      CHECK(label.span->end() == oracle.end);
      CHECK((label.origin == PseudoOrigin::kQuestionerFallback) ==
            oracle.fallback);
    }

    // support is maximal over labels and lies on the k/n grid
    int counts[4] = {0, 0, 0, 0};
    for (const auto& r : rollouts) {
      if (r.valid && r.answer) counts[static_cast<int>(*r.answer)] += 1;
    }
    for (int c : counts) {
      CHECK(label.support >= double(c) / 10.0);
    }
    const double grid = label.support * 10.0;
    CHECK(grid == doctest::Approx(std::round(grid)));

    // consensus spans stay within the hull of contributing spans
    if (label.origin == PseudoOrigin::kConsensus) {
      double lo = 1e9;
      double hi = -1e9;
      for (const auto& r : rollouts) {
        if (r.valid && r.answer && *r.answer == label.label && r.span) {
          lo = std::min(lo, r.span->start());
          hi = std::max(hi, r.span->end());
        }
      }
      CHECK(label.span->start() >= lo);
      CHECK(label.span->end() <= hi);
    }

    // dropping a disagreeing rollout never changes the label
    std::vector<RolloutResponse> pruned;
    bool dropped = false;
    for (const auto& r : rollouts) {
      if (!dropped && (!r.valid || !r.answer || *r.answer != label.label)) {
        dropped = true;
        continue;
      }
      pruned.push_back(r);
    }
    if (dropped && !pruned.empty()) {
      bool any_valid = false;
      for (const auto& r : pruned) any_valid |= r.valid;
      if (any_valid) {
        CHECK(derive_pseudo_label(pruned, unit).label == label.label);
      }
    }

    if (gate_retains(label, gate)) ++retained;
    CHECK(gate_retains(label, gate) ==
          (label.support >= 0.3 && label.support <= 0.8));
  }
  CHECK(retained > 0);
}
