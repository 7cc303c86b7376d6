#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>

#include "clft/geometry.hpp"

namespace clft {

enum class SubsetTag { light_dry, light_wet, dark_dry, dark_wet };
SubsetTag subset_from_string(const std::string& s);
std::string subset_to_string(SubsetTag t);
constexpr std::array<SubsetTag, 4> kAllSubsets{SubsetTag::light_dry, SubsetTag::light_wet,
                                               SubsetTag::dark_dry, SubsetTag::dark_wet};

/// Pixel confusion counts per class. Background (0) is tracked internally;
/// reports cover vehicle and human only. Ground-truth void pixels are
/// skipped entirely and only counted in void_excluded.
struct ConfusionState {
  struct Counts {
    uint64_t tp = 0, fp = 0, fn = 0;
  };
  std::array<Counts, 3> per_class{};
  uint64_t void_excluded = 0;

  void merge(const ConfusionState& other);
};

void accumulate(ConfusionState& state, const ClassMask& pred, const ClassMask& gt);

struct ClassMetrics {
  std::optional<double> iou, precision, recall;
};

/// iou = TP/(TP+FP+FN), precision = TP/(TP+FP), recall = TP/(TP+FN); empty
/// denominators are reported as undefined, not zero.
std::array<ClassMetrics, 3> metrics(const ConfusionState& state);

struct StratifiedReport {
  /// subset name ("light-dry", ..., "all-weather") -> class name -> metrics.
  std::string json;
  std::string text;
};

/// Per-subset rows plus an all-weather row aggregated from raw counts (not
/// averaged percentages).
StratifiedReport stratified_report(const std::map<SubsetTag, ConfusionState>& results);

struct TimingStats {
  double mean_ms = 0.0;
  double std_ms = 0.0;
  int64_t warmup = 0;
  int64_t measured = 0;
};

/// Runs `warmup` unrecorded forwards, then times `measured` forwards on the
/// monotonic clock.
TimingStats time_inference(const std::function<void()>& run, int64_t warmup, int64_t measured);
std::string timing_json(const TimingStats& stats);

}  // namespace clft
