#include "timeline.hpp"

#include <cmath>
#include <vector>

#include "doctest.h"
#include "util.hpp"

using namespace evz;

namespace {

TimeSpan span(double s, double e) { return *TimeSpan::make(s, e); }

// Straight-line re-implementations kept independent of the library path.
double oracle_tiou(double as, double ae, double bs, double be) {
  const double lo = as > bs ? as : bs;
  const double hi = ae < be ? ae : be;
  double inter = hi - lo;
  if (inter < 0.0) inter = 0.0;
  const double hull = (ae > be ? ae : be) - (as < bs ? as : bs);
  return inter / hull;
}

double oracle_alignment(double ps, double pe, double ts, double te, double T) {
  double fs = 1.0 - std::fabs(ps - ts) / T;
  double fe = 1.0 - std::fabs(pe - te) / T;
  if (fs < 0.0) fs = 0.0;
  if (fe < 0.0) fe = 0.0;
  return oracle_tiou(ps, pe, ts, te) * fs * fe;
}

double oracle_median(std::vector<double> v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    for (std::size_t j = i; j > 0 && v[j] < v[j - 1]; --j) {
      std::swap(v[j], v[j - 1]);
    }
  }
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

TimeSpan random_span(Rng& rng, double limit) {
  for (;;) {
    const double a = rng.uniform01() * limit;
    const double b = rng.uniform01() * limit;
    if (a != b) {
      return span(a < b ? a : b, a > b ? a : b);
    }
  }
}

}  // namespace

TEST_CASE("TimeSpan construction rejects degenerate and inverted spans") {
  CHECK(TimeSpan::make(2.0, 6.0).has_value());
  CHECK_FALSE(TimeSpan::make(6.0, 6.0).has_value());
  CHECK_FALSE(TimeSpan::make(6.0, 2.0).has_value());
  CHECK_FALSE(TimeSpan::make(-1.0, 2.0).has_value());
  CHECK_FALSE(TimeSpan::make(0.0, std::nan("")).has_value());
}

TEST_CASE("clamp_span clamps into [0, duration] and rejects degenerates") {
  const auto clamped = clamp_span(9.0, 15.0, 10.0);
  REQUIRE(clamped.has_value());
  CHECK(clamped->start() == 9.0);
  CHECK(clamped->end() == 10.0);
  CHECK_FALSE(clamp_span(12.0, 15.0, 10.0).has_value());
  CHECK_FALSE(clamp_span(-5.0, -1.0, 10.0).has_value());
  CHECK_FALSE(clamp_span(8.0, 4.0, 10.0).has_value());
  const auto negative_start = clamp_span(-5.0, 3.0, 10.0);
  REQUIRE(negative_start.has_value());
  CHECK(negative_start->start() == 0.0);
  CHECK(negative_start->end() == 3.0);
}

TEST_CASE("tiou known values") {
  CHECK(tiou(span(2, 6), span(2, 6)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(tiou(span(0, 1), span(5, 6)) == 0.0);
  CHECK(tiou(span(2, 6), span(4, 8)) ==
        doctest::Approx(2.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("alignment_reward known values") {
  CHECK(alignment_reward(span(4, 8), span(4, 8), 10.0) == 1.0);
  CHECK(alignment_reward(span(0, 1), span(5, 6), 10.0) == 0.0);
  CHECK(alignment_reward(span(2, 6), span(4, 8), 10.0) ==
        doctest::Approx((1.0 / 3.0) * 0.8 * 0.8).epsilon(1e-12));
  CHECK_THROWS_AS(alignment_reward(span(0, 1), span(0, 1), 0.0), Error);
  CHECK_THROWS_AS(alignment_reward(span(0, 1), span(0, 1), -3.0), Error);
}

TEST_CASE("median_consensus known values") {
  CHECK_FALSE(median_consensus({}).has_value());

  const std::vector<TimeSpan> single = {span(3, 7)};
  const auto identity = median_consensus(single);
  REQUIRE(identity.has_value());
  CHECK(*identity == span(3, 7));

  const std::vector<TimeSpan> three = {span(1, 5), span(2, 6), span(3, 7)};
  const auto odd = median_consensus(three);
  REQUIRE(odd.has_value());
  CHECK(odd->start() == 2.0);
  CHECK(odd->end() == 6.0);
}

TEST_CASE("tiou properties on random spans") {
  Rng rng(101);
  for (int i = 0; i < 2000; ++i) {
    const TimeSpan a = random_span(rng, 100.0);
    const TimeSpan b = random_span(rng, 100.0);
    const double ab = tiou(a, b);
    CHECK(ab == tiou(b, a));
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0);
    CHECK(tiou(a, a) == 1.0);
    const bool disjoint = a.end() <= b.start() || b.end() <= a.start();
    CHECK((ab == 0.0) == disjoint);

    // Shifting all spans and T by a common offset leaves tiou unchanged.
    const double shift = rng.uniform01() * 50.0;
    const TimeSpan as = span(a.start() + shift, a.end() + shift);
    const TimeSpan bs = span(b.start() + shift, b.end() + shift);
    CHECK(tiou(as, bs) == doctest::Approx(ab).epsilon(1e-9));

    // Scaling all times by a positive factor leaves both rewards unchanged.
    const double k = 0.25 + rng.uniform01() * 4.0;
    const TimeSpan ak = span(a.start() * k, a.end() * k);
    const TimeSpan bk = span(b.start() * k, b.end() * k);
    CHECK(tiou(ak, bk) == doctest::Approx(ab).epsilon(1e-9));
    CHECK(alignment_reward(ak, bk, 100.0 * k) ==
          doctest::Approx(alignment_reward(a, b, 100.0)).epsilon(1e-9));
  }
}

TEST_CASE("alignment_reward is bounded by tiou with equality at identity") {
  Rng rng(202);
  for (int i = 0; i < 2000; ++i) {
    const TimeSpan p = random_span(rng, 50.0);
    const TimeSpan t = random_span(rng, 50.0);
    const double r = alignment_reward(p, t, 50.0);
    CHECK(r <= tiou(p, t) + 1e-12);
    CHECK(r >= 0.0);
    CHECK(r <= 1.0);
    const bool identical = approx_equal(p, t);
    if (identical) {
      CHECK(r == doctest::Approx(1.0).epsilon(1e-9));
    } else {
      CHECK(r < 1.0);
    }
  }
  CHECK(alignment_reward(span(1, 2), span(1, 2), 7.0) == 1.0);
}

TEST_CASE("median_consensus keeps order on odd random inputs") {
  Rng rng(303);
  for (int i = 0; i < 1000; ++i) {
    const int n = 1 + 2 * static_cast<int>(rng.bounded(6));  // odd counts
    std::vector<TimeSpan> spans;
    std::vector<double> starts;
    std::vector<double> ends;
    for (int j = 0; j < n; ++j) {
      const TimeSpan s = random_span(rng, 40.0);
      spans.push_back(s);
      starts.push_back(s.start());
      ends.push_back(s.end());
    }
    const auto consensus = median_consensus(spans);
    REQUIRE(consensus.has_value());
    CHECK(consensus->start() <= consensus->end());
    CHECK(consensus->start() == oracle_median(starts));
    CHECK(consensus->end() == oracle_median(ends));
  }
}

TEST_CASE("oracle equivalence on 10k random span pairs") {
  Rng rng(404);
  for (int i = 0; i < 10000; ++i) {
    const TimeSpan a = random_span(rng, 200.0);
    const TimeSpan b = random_span(rng, 200.0);
    const double T = 200.0 + rng.uniform01() * 100.0;
    CHECK(std::fabs(tiou(a, b) -
                    oracle_tiou(a.start(), a.end(), b.start(), b.end())) <=
          1e-12);
    CHECK(std::fabs(alignment_reward(a, b, T) -
                    oracle_alignment(a.start(), a.end(), b.start(), b.end(),
                                     T)) <= 1e-12);
  }
}
