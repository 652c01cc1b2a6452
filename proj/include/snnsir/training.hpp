#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "snnsir/metrics.hpp"
#include "snnsir/network.hpp"

namespace snnsir {

struct ManifestEntry;  // data.hpp

struct LossConfig {
  std::vector<double> lambda_k{1.0, 1.0, 1.0};  // per-tap weights

  void validate() const;
};

/// Frozen, seeded random 3-level conv pyramid standing in for a pretrained
/// feature extractor: taps at strides 1, 2 and 4.
class PerceptualExtractor {
 public:
  explicit PerceptualExtractor(uint64_t seed = 0x5eedf00d);
  std::vector<Tensor> features(const Tensor& images) const;  // [N,3,H,W] -> 3 taps

 private:
  Conv2dLayer c1_, c2_, c3_;
};

/// Mean absolute error per view, summed over the two views.
Tensor l1_loss(const StereoPair& pred, const StereoPair& target);

Tensor perceptual_loss(const StereoPair& pred, const StereoPair& target,
                       const PerceptualExtractor& extractor, const LossConfig& cfg);

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double weight_decay = 1e-4;
  double eps = 1e-8;

  void validate() const;
};

/// Decoupled weight decay AdamW. NaN gradients abort with the parameter name.
class AdamW {
 public:
  AdamW(std::vector<ParamEntry> params, const AdamWConfig& cfg);
  void step();
  void zero_grad();
  int64_t step_count() const { return t_; }

 private:
  std::vector<ParamEntry> params_;
  std::vector<std::vector<double>> m_, v_;
  AdamWConfig cfg_;
  int64_t t_ = 0;
};

/// Global-norm gradient clipping; returns the pre-clip norm.
double clip_grad_norm(std::vector<ParamEntry>& params, double max_norm);

struct TrainSample {
  Tensor clean_left, clean_right, degraded_left, degraded_right;  // [3,H,W]
};

struct TrainConfig {
  int64_t steps = 2000;
  int64_t batch = 4;
  int64_t crop = 32;
  uint64_t seed = 0;
  int64_t val_interval = 100;
  int64_t val_max_samples = 8;
  int64_t checkpoint_interval = 500;
  double clip_norm = 1.0;
  int64_t start_step = 0;
  AdamWConfig adamw{};
  LossConfig loss{};
  std::string out_dir;  // empty: no checkpoints written
};

struct TrainResult {
  double final_l1 = 0.0;
  double final_total = 0.0;
  double last_val_psnr = 0.0;
  int64_t steps_run = 0;
};

/// Surrogate-gradient BPTT loop: per step, random crops into a batch, stage-1
/// L1 on the coarse output plus perceptual loss on the refined output,
/// gradient clipping, AdamW. Emits one JSONL record per step into `log`.
/// Divergence (non-finite loss) saves the last good checkpoint and throws.
TrainResult train(const std::vector<TrainSample>& train_set,
                  const std::vector<TrainSample>& val_set, SnnsirNetwork& net,
                  const TrainConfig& cfg, std::ostream* log);

std::vector<TrainSample> load_samples(const std::vector<const ManifestEntry*>& entries);

/// Validation PSNR of the refined output against clean pairs (eval mode).
double validation_psnr(SnnsirNetwork& net, const std::vector<TrainSample>& val_set,
                       int64_t max_samples);

}  // namespace snnsir
