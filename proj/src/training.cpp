#include "clft/training.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

namespace clft {

void TrainConfig::validate() const {
  if (!(lr0 > 0.0)) fail("train config: lr0 must be positive");
  if (!(alpha > 0.0) || alpha > 1.0) fail("train config: alpha must be in (0, 1]");
  if (batch < 1) fail("train config: batch must be >= 1");
  if (max_epochs < 0) fail("train config: max_epochs must be >= 0");
  if (patience < 0) fail("train config: patience must be >= 0");
  if (dilate_radius < 0) fail("train config: dilate_radius must be >= 0");
  if (class_weights)
    for (double w : *class_weights)
      if (!(w > 0.0)) fail("train config: class weights must be positive");
}

WeightedCeResult weighted_cross_entropy(const Tensor& logits, const ClassMask& mask,
                                        const std::array<double, 3>& weights) {
  if (logits.rank() != 3 || logits.dim(0) != 3)
    fail("weighted_cross_entropy: logits must be 3 x h x w, got " + shape_str(logits.shape()));
  if (logits.dim(1) != mask.height || logits.dim(2) != mask.width)
    fail("weighted_cross_entropy: mask extents " + std::to_string(mask.width) + "x" +
         std::to_string(mask.height) + " do not match logits " + shape_str(logits.shape()));
  const int64_t hw = mask.width * mask.height;

  int64_t n_valid = 0;
  for (uint8_t code : mask.codes)
    if (code != kVoid) ++n_valid;

  WeightedCeResult result;
  if (n_valid == 0) {
    result.loss = Tensor({1}, 0.0);
    result.all_void = true;
    return result;
  }

  auto codes = std::make_shared<std::vector<uint8_t>>(mask.codes);
  auto ln = logits.node();
  const double inv_n = 1.0 / static_cast<double>(n_valid);
  Tensor out = make_op_output({1}, {logits}, [ln, codes, weights, hw, inv_n](Node& self) {
    ln->ensure_grad();
    const double g = self.grad[0];
    const double* lv = ln->value.data();
#pragma omp parallel for schedule(static) if (hw > 8192)
    for (int64_t p = 0; p < hw; ++p) {
      const uint8_t code = (*codes)[static_cast<size_t>(p)];
      if (code == kVoid) continue;
      const double l0 = lv[p], l1 = lv[hw + p], l2 = lv[2 * hw + p];
      const double mx = std::max({l0, l1, l2});
      const double e0 = std::exp(l0 - mx), e1 = std::exp(l1 - mx), e2 = std::exp(l2 - mx);
      const double inv_sum = 1.0 / (e0 + e1 + e2);
      const double w = weights[code] * inv_n * g;
      ln->grad[p] += w * (e0 * inv_sum - (code == 0 ? 1.0 : 0.0));
      ln->grad[hw + p] += w * (e1 * inv_sum - (code == 1 ? 1.0 : 0.0));
      ln->grad[2 * hw + p] += w * (e2 * inv_sum - (code == 2 ? 1.0 : 0.0));
    }
  });

  const double* lv = logits.data().data();
  double acc = 0.0;
  for (int64_t p = 0; p < hw; ++p) {
    const uint8_t code = mask.codes[static_cast<size_t>(p)];
    if (code == kVoid) continue;
    const double l0 = lv[p], l1 = lv[hw + p], l2 = lv[2 * hw + p];
    const double mx = std::max({l0, l1, l2});
    const double lse = mx + std::log(std::exp(l0 - mx) + std::exp(l1 - mx) + std::exp(l2 - mx));
    acc += weights[code] * (lse - lv[code * hw + p]);
  }
  out.data()[0] = acc * inv_n;
  result.loss = out;
  return result;
}

double lr_at(int64_t epoch, const TrainConfig& cfg) {
  if (epoch < 0) fail("lr_at: epoch must be >= 0");
  return cfg.lr0 * std::pow(cfg.alpha, static_cast<double>(epoch));
}

void adam_step(std::vector<double>& params, const std::vector<double>& grads, AdamState& state, int64_t t,
               double lr, double beta1, double beta2, double eps) {
  const size_t n = params.size();
  if (grads.size() != n) fail("adam_step: gradient size mismatch");
  if (state.m.empty()) {
    state.m.assign(n, 0.0);
    state.v.assign(n, 0.0);
  }
  if (state.m.size() != n) fail("adam_step: state size mismatch");
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
#pragma omp parallel for schedule(static) if (n > 16384)
  for (int64_t i = 0; i < static_cast<int64_t>(n); ++i) {
    const double g = grads[static_cast<size_t>(i)];
    double& m = state.m[static_cast<size_t>(i)];
    double& v = state.v[static_cast<size_t>(i)];
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g * g;
    const double mhat = m / bc1;
    const double vhat = v / bc2;
    params[static_cast<size_t>(i)] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

void AdamOptimizer::step(ClftModel& model, double lr) {
  ++t_;
  model.visit_params([this, lr](const std::string& name, Tensor& t) {
    if (!t.has_grad()) return;  // untouched stream in single-modality runs
    adam_step(t.data(), t.grad(), states_[name], t_, lr);
  });
}

void split_indices(int64_t n, uint64_t seed, std::vector<int64_t>& train, std::vector<int64_t>& val,
                   std::vector<int64_t>& test) {
  Rng rng(seed ^ 0x5b1ce5u);
  const std::vector<int64_t> perm = rng.permutation(n);
  const int64_t n_train = (n * 6) / 10;
  const int64_t n_val = (n * 2) / 10;
  train.assign(perm.begin(), perm.begin() + n_train);
  val.assign(perm.begin() + n_train, perm.begin() + n_train + n_val);
  test.assign(perm.begin() + n_train + n_val, perm.end());
}

std::array<double, 3> inverse_frequency_weights(const Dataset& data, const std::vector<int64_t>& train_idx) {
  std::array<uint64_t, 3> freq{0, 0, 0};
  for (int64_t i : train_idx)
    for (uint8_t code : data.frames[static_cast<size_t>(i)].mask.codes)
      if (code != kVoid) ++freq[code];
  const double total = static_cast<double>(freq[0] + freq[1] + freq[2]);
  if (total == 0.0) return {1.0, 1.0, 1.0};
  std::array<double, 3> w{};
  double min_w = 0.0;
  for (size_t c = 0; c < 3; ++c)
    if (freq[c] > 0) {
      w[c] = total / (3.0 * static_cast<double>(freq[c]));
      min_w = min_w == 0.0 ? w[c] : std::min(min_w, w[c]);
    }
  if (min_w == 0.0) min_w = 1.0;
  for (size_t c = 0; c < 3; ++c) {
    if (freq[c] == 0)
      w[c] = 20.0 * min_w;
    else
      w[c] = std::min(w[c], 20.0 * min_w);
  }
  return w;
}

Tensor hflip_image(const Tensor& img) {
  if (img.rank() != 3) fail("hflip_image: rank-3 tensor required");
  const int64_t c = img.dim(0), h = img.dim(1), w = img.dim(2);
  Tensor out(img.shape());
  const double* src = img.data().data();
  double* dst = out.data().data();
  for (int64_t ch = 0; ch < c; ++ch)
    for (int64_t v = 0; v < h; ++v)
      for (int64_t u = 0; u < w; ++u) dst[(ch * h + v) * w + u] = src[(ch * h + v) * w + (w - 1 - u)];
  return out;
}

PlaneStack hflip_planes(const PlaneStack& planes) {
  PlaneStack out(planes.width, planes.height);
  for (int64_t v = 0; v < planes.height; ++v)
    for (int64_t u = 0; u < planes.width; ++u) {
      const size_t dst = out.idx(v, u);
      const size_t src = planes.idx(v, planes.width - 1 - u);
      out.xy[dst] = planes.xy[src];
      out.yz[dst] = planes.yz[src];
      out.xz[dst] = planes.xz[src];
      out.occupancy[dst] = planes.occupancy[src];
    }
  return out;
}

ClassMask hflip_mask(const ClassMask& mask) {
  ClassMask out(mask.width, mask.height);
  for (int64_t v = 0; v < mask.height; ++v)
    for (int64_t u = 0; u < mask.width; ++u)
      out.codes[out.idx(v, u)] = mask.codes[mask.idx(v, mask.width - 1 - u)];
  return out;
}

ClassMask argmax_mask(const Tensor& logits) {
  if (logits.rank() != 3) fail("argmax_mask: rank-3 logits required");
  const int64_t c = logits.dim(0), h = logits.dim(1), w = logits.dim(2);
  if (c != 3) fail("argmax_mask: expected 3 classes");
  ClassMask mask(w, h);
  const double* lv = logits.data().data();
  const int64_t hw = h * w;
  for (int64_t p = 0; p < hw; ++p) {
    uint8_t best = 0;
    double bv = lv[p];
    if (lv[hw + p] > bv) {
      bv = lv[hw + p];
      best = 1;
    }
    if (lv[2 * hw + p] > bv) best = 2;
    mask.codes[static_cast<size_t>(p)] = best;
  }
  return mask;
}

namespace {

struct PreparedFrame {
  Tensor rgb;
  PlaneStack planes;  // densified
  ClassMask mask;
};

nlohmann::ordered_json record_json(const EpochRecord& r) {
  nlohmann::ordered_json j;
  j["epoch"] = r.epoch;
  j["lr"] = r.lr;
  j["train_loss"] = r.train_loss;
  j["val_loss"] = r.val_loss;
  nlohmann::ordered_json iou;
  iou["vehicle"] = r.val_iou_vehicle ? nlohmann::ordered_json(*r.val_iou_vehicle) : nlohmann::ordered_json(nullptr);
  iou["human"] = r.val_iou_human ? nlohmann::ordered_json(*r.val_iou_human) : nlohmann::ordered_json(nullptr);
  j["val_iou"] = iou;
  return j;
}

}  // namespace

FitResult fit(ClftModel& model, const Dataset& data, const TrainConfig& cfg, Modality modality) {
  cfg.validate();
  if (data.frames.empty()) fail("fit: dataset is empty");

  FitResult result;
  split_indices(static_cast<int64_t>(data.frames.size()), cfg.seed, result.train_idx, result.val_idx,
                result.test_idx);
  if (result.train_idx.empty()) fail("fit: dataset too small for a training split");

  result.class_weights = cfg.class_weights ? *cfg.class_weights
                                           : inverse_frequency_weights(data, result.train_idx);

  std::vector<PreparedFrame> prepared(data.frames.size());
  for (size_t i = 0; i < data.frames.size(); ++i) {
    prepared[i].rgb = data.frames[i].rgb;
    prepared[i].planes = densify(data.frames[i].planes_raw, cfg.dilate_radius);
    prepared[i].mask = data.frames[i].mask;
  }

  AdamOptimizer opt;
  Rng shuffle_rng(cfg.seed ^ 0x7a51ULL);
  Rng aug_rng(cfg.seed + 17);

  auto forward_loss = [&](const PreparedFrame& f, bool flip) -> WeightedCeResult {
    const Tensor rgb = flip ? hflip_image(f.rgb) : f.rgb;
    const PlaneStack planes = flip ? hflip_planes(f.planes) : f.planes;
    const ClassMask mask = flip ? hflip_mask(f.mask) : f.mask;
    const Tensor logits = model.forward(&rgb, &planes, modality);
    return weighted_cross_entropy(logits, mask, result.class_weights);
  };

  auto validation_pass = [&](EpochRecord& rec) {
    NoGradGuard ng;
    double loss_sum = 0.0;
    int64_t counted = 0;
    ConfusionState confusion;
    for (int64_t i : result.val_idx) {
      const PreparedFrame& f = prepared[static_cast<size_t>(i)];
      const Tensor logits = model.forward(&f.rgb, &f.planes, modality);
      const WeightedCeResult ce = weighted_cross_entropy(logits, f.mask, result.class_weights);
      if (!ce.all_void) {
        loss_sum += ce.loss.item();
        ++counted;
      }
      accumulate(confusion, argmax_mask(logits), f.mask);
    }
    rec.val_loss = counted > 0 ? loss_sum / static_cast<double>(counted) : 0.0;
    const auto m = metrics(confusion);
    rec.val_iou_vehicle = m[kVehicle].iou;
    rec.val_iou_human = m[kHuman].iou;
  };

  std::map<std::string, std::vector<double>> best_params;
  auto snapshot = [&]() {
    best_params.clear();
    model.visit_params([&](const std::string& name, Tensor& t) { best_params[name] = t.data(); });
  };

  double best_val = 0.0;
  int64_t bad_epochs = 0;
  std::ostringstream log_stream;

  for (int64_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr_at(epoch, cfg);

    std::vector<int64_t> order = result.train_idx;
    {
      const std::vector<int64_t> perm = shuffle_rng.permutation(static_cast<int64_t>(order.size()));
      std::vector<int64_t> shuffled(order.size());
      for (size_t i = 0; i < order.size(); ++i) shuffled[i] = order[static_cast<size_t>(perm[i])];
      order.swap(shuffled);
    }

    double train_loss_sum = 0.0;
    int64_t train_counted = 0;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch)) {
      const size_t stop = std::min(order.size(), start + static_cast<size_t>(cfg.batch));
      const double inv_batch = 1.0 / static_cast<double>(stop - start);
      model.zero_grads();
      for (size_t k = start; k < stop; ++k) {
        const bool flip = cfg.augment && aug_rng.uniform() < 0.5;
        const WeightedCeResult ce = forward_loss(prepared[static_cast<size_t>(order[k])], flip);
        if (ce.all_void) continue;
        const double value = ce.loss.item();
        if (std::isnan(value) || std::isinf(value))
          fail("fit: divergent loss (" + std::to_string(value) + ") at epoch " + std::to_string(epoch));
        train_loss_sum += value;
        ++train_counted;
        scale(ce.loss, inv_batch).backward();
      }
      opt.step(model, rec.lr);
    }
    rec.train_loss = train_counted > 0 ? train_loss_sum / static_cast<double>(train_counted) : 0.0;

    validation_pass(rec);
    result.log.push_back(rec);
    log_stream << record_json(rec).dump() << "\n";

    if (result.best_epoch < 0 || rec.val_loss < best_val) {
      best_val = rec.val_loss;
      result.best_epoch = epoch;
      bad_epochs = 0;
      snapshot();
    } else {
      ++bad_epochs;
      if (bad_epochs > cfg.patience) break;
    }
  }

  if (result.best_epoch >= 0) {
    model.visit_params([&](const std::string& name, Tensor& t) {
      auto it = best_params.find(name);
      if (it != best_params.end()) t.data() = it->second;
    });
    result.best_val_loss = best_val;
  }
  result.steps = opt.steps();
  result.log_jsonl = log_stream.str();
  return result;
}

}  // namespace clft
