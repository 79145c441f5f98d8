#pragma once

// The query-only detector oracle: detection records, IoU target matching,
// the query ledger, and a deterministic mock backend whose objectness is a
// pure function of dark-pixel coverage inside the target box.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "advig/error.hpp"
#include "advig/geometry.hpp"
#include "advig/imaging.hpp"

namespace advig {

/// Detector box in continuous pixel coordinates.
struct BBoxd {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  double area() const {
    return x2 > x1 && y2 > y1 ? (x2 - x1) * (y2 - y1) : 0.0;
  }
  static BBoxd of(const Rect& r) {
    return BBoxd{static_cast<double>(r.x1), static_cast<double>(r.y1),
                 static_cast<double>(r.x2), static_cast<double>(r.y2)};
  }
  BBoxd scaled(double rx, double ry) const {
    return BBoxd{x1 * rx, y1 * ry, x2 * rx, y2 * ry};
  }
  friend bool operator==(const BBoxd&, const BBoxd&) = default;
};

/// One detector output: box, objectness confidence, class label and score.
struct Detection {
  BBoxd bbox;
  double objectness = 0.0;
  int class_id = 0;
  double class_score = 0.0;
  friend bool operator==(const Detection&, const Detection&) = default;
};

enum class OracleBackend { mock, remote };

inline const char* to_string(OracleBackend b) {
  return b == OracleBackend::mock ? "mock" : "remote";
}

inline OracleBackend oracle_backend_from_string(const std::string& s) {
  if (s == "mock") return OracleBackend::mock;
  if (s == "remote") return OracleBackend::remote;
  throw InvalidParameter("unknown oracle backend: " + s);
}

/// Oracle selection plus backend knobs. The mock backend scores each
/// registered target box by dark coverage: with d the fraction of box
/// pixels whose mean channel intensity is below mock_dark_threshold, it
/// reports objectness clamp(1 - mock_beta * d, 0, 1).
struct OracleConfig {
  OracleBackend backend = OracleBackend::mock;
  std::string endpoint;                  // remote only, scheme://host:port
  double mock_beta = 2.0;
  int mock_dark_threshold = 64;
  std::vector<Rect> mock_targets;        // boxes in reference coordinates
  FrameDims mock_ref_dims;               // coordinate frame of mock_targets
  std::chrono::milliseconds timeout{5000};
  int max_retries = 2;                   // fitness-level retry budget

  void validate() const {
    if (backend == OracleBackend::remote && endpoint.empty())
      throw InvalidParameter("remote oracle requires an endpoint");
    if (!(mock_beta > 0.0)) throw InvalidParameter("mock beta must be > 0");
    if (mock_dark_threshold < 0 || mock_dark_threshold > 255)
      throw InvalidParameter("dark threshold must be in [0,255]");
    if (timeout.count() <= 0) throw InvalidParameter("timeout must be > 0");
  }
};

/// Count of successful detector forward passes. Shared across workers.
class QueryLedger {
 public:
  void increment() { count_.fetch_add(1, std::memory_order_relaxed); }
  long long count() const { return count_.load(std::memory_order_relaxed); }

 private:
  std::atomic<long long> count_{0};
};

// ---------------------------------------------------------------------------
// IoU matching
// ---------------------------------------------------------------------------

inline double iou(const BBoxd& a, const BBoxd& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

/// Highest objectness among detections overlapping the target box with
/// IoU >= iou_threshold; 0.0 when nothing overlaps (the target vanished).
inline double match_target(const std::vector<Detection>& detections,
                           const BBoxd& target_bbox,
                           double iou_threshold = 0.5) {
  if (!(iou_threshold > 0.0) || iou_threshold > 1.0)
    throw InvalidParameter("IoU threshold must be in (0,1]");
  double best = 0.0;
  for (const Detection& d : detections)
    if (iou(d.bbox, target_bbox) >= iou_threshold)
      best = std::max(best, d.objectness);
  return best;
}

inline double match_target(const std::vector<Detection>& detections,
                           const Rect& target_bbox,
                           double iou_threshold = 0.5) {
  return match_target(detections, BBoxd::of(target_bbox), iou_threshold);
}

// ---------------------------------------------------------------------------
// Mock backend
// ---------------------------------------------------------------------------

namespace detail {

// Dark test identical across channel counts: mean channel intensity below
// the integer threshold, evaluated exactly in integers.
inline bool dark_pixel(const Frame& f, int x, int y, int threshold) {
  int sum = 0;
  for (int c = 0; c < f.channels; ++c) sum += f.at(x, y, c);
  return sum < threshold * f.channels;
}

}  // namespace detail

/// Dark-coverage objectness of one box: clamp(1 - beta * d, 0, 1) with d
/// the fraction of box pixels whose mean channel intensity is below the
/// dark threshold.
inline double mock_objectness(const Frame& frame, const Rect& target_bbox,
                              const OracleConfig& config) {
  if (!frame.valid()) throw InvalidParameter("invalid frame");
  if (target_bbox.empty()) throw InvalidParameter("target box is empty");
  const Rect roi = target_bbox.intersect(Rect{0, 0, frame.width, frame.height});
  if (roi.empty() || roi != target_bbox)
    throw InvalidParameter("target box exceeds frame bounds");

  long long dark = 0;
  for (int y = roi.y1; y < roi.y2; ++y)
    for (int x = roi.x1; x < roi.x2; ++x)
      if (detail::dark_pixel(frame, x, y, config.mock_dark_threshold)) ++dark;
  const double d = static_cast<double>(dark) / static_cast<double>(roi.area());
  return std::clamp(1.0 - config.mock_beta * d, 0.0, 1.0);
}

/// Deterministic mock detector: scores every registered target box (scaled
/// to the frame's dimensions when they differ from the reference) and emits
/// a detection wherever the objectness is positive.
inline std::vector<Detection> mock_detect(const Frame& frame,
                                          const OracleConfig& config) {
  if (!frame.valid()) throw InvalidParameter("invalid frame");
  std::vector<Detection> out;
  const bool have_ref = config.mock_ref_dims.valid();
  const double rx =
      have_ref ? static_cast<double>(frame.width) / config.mock_ref_dims.width
               : 1.0;
  const double ry =
      have_ref
          ? static_cast<double>(frame.height) / config.mock_ref_dims.height
          : 1.0;

  for (const Rect& target : config.mock_targets) {
    const BBoxd scaled = BBoxd::of(target).scaled(rx, ry);
    Rect roi{static_cast<int>(std::llround(scaled.x1)),
             static_cast<int>(std::llround(scaled.y1)),
             static_cast<int>(std::llround(scaled.x2)),
             static_cast<int>(std::llround(scaled.y2))};
    roi = roi.intersect(Rect{0, 0, frame.width, frame.height});
    if (roi.empty()) continue;
    const double obj = mock_objectness(frame, roi, config);
    if (obj > 0.0)
      out.push_back(Detection{scaled, obj, 0, obj});
  }
  return out;
}

}  // namespace advig
