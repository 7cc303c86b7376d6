#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "clft/dataset.hpp"
#include "clft/model.hpp"

namespace clft {

struct TrainConfig {
  double lr0 = 1e-4;    // the paper leaves l_0 to the code; flag-tunable
  double alpha = 0.99;  // per-epoch decay base
  int64_t batch = 32;
  /// Per-class CE weights; unset means inverse pixel frequency on the
  /// training split, capped at 20:1.
  std::optional<std::array<double, 3>> class_weights;
  int64_t max_epochs = 100;
  int64_t patience = 10;
  uint64_t seed = 0;
  bool augment = true;        // horizontal flip on rgb/planes/mask together
  int64_t dilate_radius = 2;  // densification applied to the raw planes

  void validate() const;
};

struct WeightedCeResult {
  Tensor loss;
  bool all_void = false;
};

/// Mean over non-void pixels of -weights[gt] * log softmax(logits)[gt].
/// Void pixels neither contribute nor count in the denominator. An all-void
/// mask yields a constant zero loss with the warning flag set.
WeightedCeResult weighted_cross_entropy(const Tensor& logits, const ClassMask& mask,
                                        const std::array<double, 3>& weights);

/// l_i = l_0 * alpha^i.
double lr_at(int64_t epoch, const TrainConfig& cfg);

struct AdamState {
  std::vector<double> m, v;
};

/// One Adam update (beta1 0.9, beta2 0.999, eps 1e-8) with bias correction;
/// t is the 1-based step count.
void adam_step(std::vector<double>& params, const std::vector<double>& grads, AdamState& state, int64_t t,
               double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

class AdamOptimizer {
public:
  /// Applies adam_step to every parameter with an accumulated gradient.
  void step(ClftModel& model, double lr);
  int64_t steps() const { return t_; }

private:
  std::map<std::string, AdamState> states_;
  int64_t t_ = 0;
};

struct EpochRecord {
  int64_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  std::optional<double> val_iou_vehicle, val_iou_human;
};

struct FitResult {
  std::vector<EpochRecord> log;
  std::string log_jsonl;
  int64_t best_epoch = -1;
  double best_val_loss = 0.0;
  int64_t steps = 0;
  std::array<double, 3> class_weights{1.0, 1.0, 1.0};
  std::vector<int64_t> train_idx, val_idx, test_idx;  // seeded 60/20/20 split
};

/// Epoch loop with seeded shuffling, per-epoch lr_at, validation tracking,
/// early stopping on validation loss, and best-checkpoint restore. Throws on
/// a divergent (NaN) loss.
FitResult fit(ClftModel& model, const Dataset& data, const TrainConfig& cfg, Modality modality);

/// The deterministic 60/20/20 split fit uses, exposed for evaluation runs.
void split_indices(int64_t n, uint64_t seed, std::vector<int64_t>& train, std::vector<int64_t>& val,
                   std::vector<int64_t>& test);

std::array<double, 3> inverse_frequency_weights(const Dataset& data, const std::vector<int64_t>& train_idx);

// Horizontal flips applied identically to the three aligned inputs.
Tensor hflip_image(const Tensor& img);
PlaneStack hflip_planes(const PlaneStack& planes);
ClassMask hflip_mask(const ClassMask& mask);

/// Argmax over the class axis of C x H x W logits; never emits void.
ClassMask argmax_mask(const Tensor& logits);

}  // namespace clft
