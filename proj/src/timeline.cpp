#include "timeline.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "util.hpp"

namespace evz {

std::optional<TimeSpan> TimeSpan::make(double start_s, double end_s) {
  if (!std::isfinite(start_s) || !std::isfinite(end_s)) return std::nullopt;
  if (!(start_s >= 0.0) || !(start_s < end_s)) return std::nullopt;
  return TimeSpan(start_s, end_s);
}

std::optional<TimeSpan> clamp_span(double start_s, double end_s,
                                   double duration_s) {
  if (!std::isfinite(start_s) || !std::isfinite(end_s)) return std::nullopt;
  if (!(duration_s > 0.0)) return std::nullopt;
  if (!(start_s < end_s)) return std::nullopt;
  const double s = std::clamp(start_s, 0.0, duration_s);
  const double e = std::clamp(end_s, 0.0, duration_s);
  return TimeSpan::make(s, e);
}

double tiou(const TimeSpan& a, const TimeSpan& b) {
  const double inter =
      std::max(0.0, std::min(a.end(), b.end()) - std::max(a.start(), b.start()));
  const double hull =
      std::max(a.end(), b.end()) - std::min(a.start(), b.start());
  return inter / hull;  // hull > 0 because spans are non-degenerate
}

double alignment_reward(const TimeSpan& pred, const TimeSpan& target,
                        double duration_s) {
  if (!(duration_s > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "alignment_reward: duration must be positive");
  }
  const double iou = tiou(pred, target);
  const double start_factor =
      std::max(0.0, 1.0 - std::abs(pred.start() - target.start()) / duration_s);
  const double end_factor =
      std::max(0.0, 1.0 - std::abs(pred.end() - target.end()) / duration_s);
  return iou * start_factor * end_factor;
}

namespace {

double median_sorted(std::vector<double>& values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  const std::size_t mid = n / 2;
  return (n % 2 == 1) ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

}  // namespace

std::optional<TimeSpan> median_consensus(std::span<const TimeSpan> spans) {
  if (spans.empty()) return std::nullopt;
  std::vector<double> starts;
  std::vector<double> ends;
  starts.reserve(spans.size());
  ends.reserve(spans.size());
  for (const TimeSpan& s : spans) {
    starts.push_back(s.start());
    ends.push_back(s.end());
  }
  const double ms = median_sorted(starts);
  const double me = median_sorted(ends);
  return TimeSpan::make(ms, me);  // absent when the result degenerates
}

bool approx_equal(const TimeSpan& a, const TimeSpan& b, double tol) {
  return std::abs(a.start() - b.start()) <= tol &&
         std::abs(a.end() - b.end()) <= tol;
}

}  // namespace evz
