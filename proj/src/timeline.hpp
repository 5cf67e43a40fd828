#pragma once

#include <optional>
#include <span>
#include <string>

namespace evz {

// A temporal interval in seconds. Construction enforces 0 <= start < end, so
// zero-length and inverted spans never exist as values.
class TimeSpan {
 public:
  static std::optional<TimeSpan> make(double start_s, double end_s);

  double start() const { return start_s_; }
  double end() const { return end_s_; }
  double length() const { return end_s_ - start_s_; }
  bool within(double duration_s) const { return end_s_ <= duration_s; }

  friend bool operator==(const TimeSpan&, const TimeSpan&) = default;

 private:
  TimeSpan(double s, double e) : start_s_(s), end_s_(e) {}
  double start_s_;
  double end_s_;
};

struct VideoContext {
  std::string id;
  std::string uri;
  double duration_s = 0.0;

  bool valid() const { return duration_s > 0.0; }
};

// Clamps [start, end] into [0, duration]; absent when the input is inverted,
// non-finite, or degenerates to zero length after clamping.
std::optional<TimeSpan> clamp_span(double start_s, double end_s,
                                   double duration_s);

// Temporal IoU with the hull denominator:
//   max(0, min(a.end,b.end) - max(a.start,b.start))
//   over max(a.end,b.end) - min(a.start,b.start).
// Symmetric, 0 for disjoint spans, 1 iff identical.
double tiou(const TimeSpan& a, const TimeSpan& b);

// tiou(pred, target) * prod_{b in {start,end}} [1 - |pred_b - target_b| / T]+
// Throws on duration_s <= 0.
double alignment_reward(const TimeSpan& pred, const TimeSpan& target,
                        double duration_s);

// Elementwise median of starts and of ends. Even counts use the mean of the
// two central order statistics. Absent for an empty list or a degenerate
// (zero-length) result.
std::optional<TimeSpan> median_consensus(std::span<const TimeSpan> spans);

inline constexpr double kSpanEqualityTolerance = 1e-9;
bool approx_equal(const TimeSpan& a, const TimeSpan& b,
                  double tol = kSpanEqualityTolerance);

}  // namespace evz
