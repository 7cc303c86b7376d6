#include "clft/evaluation.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

namespace clft {

SubsetTag subset_from_string(const std::string& s) {
  if (s == "light-dry") return SubsetTag::light_dry;
  if (s == "light-wet") return SubsetTag::light_wet;
  if (s == "dark-dry") return SubsetTag::dark_dry;
  if (s == "dark-wet") return SubsetTag::dark_wet;
  fail("subset: unknown tag '" + s + "'");
}

std::string subset_to_string(SubsetTag t) {
  switch (t) {
    case SubsetTag::light_dry: return "light-dry";
    case SubsetTag::light_wet: return "light-wet";
    case SubsetTag::dark_dry: return "dark-dry";
    case SubsetTag::dark_wet: return "dark-wet";
  }
  fail("subset: bad tag");
}

void ConfusionState::merge(const ConfusionState& other) {
  for (size_t c = 0; c < 3; ++c) {
    per_class[c].tp += other.per_class[c].tp;
    per_class[c].fp += other.per_class[c].fp;
    per_class[c].fn += other.per_class[c].fn;
  }
  void_excluded += other.void_excluded;
}

void accumulate(ConfusionState& state, const ClassMask& pred, const ClassMask& gt) {
  if (pred.width != gt.width || pred.height != gt.height)
    fail("accumulate: mask extents differ (" + std::to_string(pred.width) + "x" + std::to_string(pred.height) +
         " vs " + std::to_string(gt.width) + "x" + std::to_string(gt.height) + ")");
  const size_t n = pred.codes.size();
  for (size_t i = 0; i < n; ++i) {
    const uint8_t g = gt.codes[i];
    if (g == kVoid) {
      ++state.void_excluded;
      continue;
    }
    const uint8_t p = pred.codes[i];
    if (p > 2) fail("accumulate: prediction contains non-class code " + std::to_string(p));
    if (g > 2) fail("accumulate: ground truth contains unknown code " + std::to_string(g));
    if (p == g) {
      ++state.per_class[p].tp;
    } else {
      ++state.per_class[p].fp;
      ++state.per_class[g].fn;
    }
  }
}

std::array<ClassMetrics, 3> metrics(const ConfusionState& state) {
  std::array<ClassMetrics, 3> out;
  for (size_t c = 0; c < 3; ++c) {
    const auto& k = state.per_class[c];
    const double tp = static_cast<double>(k.tp);
    if (k.tp + k.fp + k.fn > 0) out[c].iou = tp / static_cast<double>(k.tp + k.fp + k.fn);
    if (k.tp + k.fp > 0) out[c].precision = tp / static_cast<double>(k.tp + k.fp);
    if (k.tp + k.fn > 0) out[c].recall = tp / static_cast<double>(k.tp + k.fn);
  }
  return out;
}

namespace {

constexpr const char* kReportClasses[2] = {"vehicle", "human"};

std::string pct(const std::optional<double>& v) {
  if (!v) return "   --";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%5.2f", *v * 100.0);
  return buf;
}

nlohmann::ordered_json metrics_json(const std::array<ClassMetrics, 3>& m) {
  nlohmann::ordered_json row;
  for (size_t c = 1; c <= 2; ++c) {
    nlohmann::ordered_json cell;
    auto put = [&cell](const char* key, const std::optional<double>& v) {
      if (v)
        cell[key] = *v;
      else
        cell[key] = nullptr;
    };
    put("iou", m[c].iou);
    put("precision", m[c].precision);
    put("recall", m[c].recall);
    row[kReportClasses[c - 1]] = cell;
  }
  return row;
}

}  // namespace

StratifiedReport stratified_report(const std::map<SubsetTag, ConfusionState>& results) {
  if (results.empty()) fail("stratified_report: at least one subset required");
  ConfusionState all;
  nlohmann::ordered_json j;
  std::ostringstream text;
  text << "subset       vehicle IoU/P/R        human IoU/P/R\n";
  auto emit_row = [&](const std::string& name, const ConfusionState& st) {
    const auto m = metrics(st);
    j[name] = metrics_json(m);
    text << name;
    for (size_t pad = name.size(); pad < 13; ++pad) text << ' ';
    text << pct(m[1].iou) << " / " << pct(m[1].precision) << " / " << pct(m[1].recall) << "   ";
    text << pct(m[2].iou) << " / " << pct(m[2].precision) << " / " << pct(m[2].recall) << "\n";
  };
  for (const auto& [tag, st] : results) {
    all.merge(st);
    emit_row(subset_to_string(tag), st);
  }
  emit_row("all-weather", all);
  StratifiedReport report;
  report.json = j.dump(2) + "\n";
  report.text = text.str();
  return report;
}

TimingStats time_inference(const std::function<void()>& run, int64_t warmup, int64_t measured) {
  if (warmup < 1 || measured < 1) fail("time_inference: warmup and measured must be >= 1");
  for (int64_t i = 0; i < warmup; ++i) run();
  std::vector<double> samples;
  samples.reserve(static_cast<size_t>(measured));
  for (int64_t i = 0; i < measured; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    run();
    const auto t1 = std::chrono::steady_clock::now();
    samples.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  TimingStats stats;
  stats.warmup = warmup;
  stats.measured = measured;
  double sum = 0.0;
  for (double s : samples) sum += s;
  stats.mean_ms = sum / static_cast<double>(measured);
  double var = 0.0;
  for (double s : samples) {
    const double d = s - stats.mean_ms;
    var += d * d;
  }
  stats.std_ms = std::sqrt(var / static_cast<double>(measured));
  return stats;
}

std::string timing_json(const TimingStats& stats) {
  nlohmann::ordered_json j;
  j["mean_ms"] = stats.mean_ms;
  j["std_ms"] = stats.std_ms;
  j["warmup"] = stats.warmup;
  j["measured"] = stats.measured;
  return j.dump(2) + "\n";
}

}  // namespace clft
