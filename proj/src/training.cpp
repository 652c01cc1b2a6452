#include "snnsir/training.hpp"

#include <cmath>
#include <filesystem>

#include "json.hpp"
#include "snnsir/data.hpp"
#include "snnsir/image_io.hpp"

namespace snnsir {

using nlohmann::json;

void LossConfig::validate() const {
  for (double l : lambda_k) {
    if (l < 0.0) throw ConfigError("loss: lambda_k must be >= 0");
  }
}

void AdamWConfig::validate() const {
  if (!(lr > 0.0) && lr != 0.0) throw ConfigError("adamw: lr must be >= 0");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
    throw ConfigError("adamw: betas must be in [0,1)");
  }
  if (eps <= 0.0) throw ConfigError("adamw: eps must be positive");
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

PerceptualExtractor::PerceptualExtractor(uint64_t seed) {
  Rng rng(seed);
  c1_ = Conv2dLayer::make(8, 3, 3, 1, 1, 1, rng);
  c2_ = Conv2dLayer::make(16, 8, 3, 2, 1, 1, rng);
  c3_ = Conv2dLayer::make(32, 16, 3, 2, 1, 1, rng);
  c1_.weight.set_requires_grad(false);
  c2_.weight.set_requires_grad(false);
  c3_.weight.set_requires_grad(false);
}

std::vector<Tensor> PerceptualExtractor::features(const Tensor& images) const {
  Tensor f1 = c1_.forward(images);
  Tensor f2 = c2_.forward(f1);
  Tensor f3 = c3_.forward(f2);
  return {f1, f2, f3};
}

Tensor l1_loss(const StereoPair& pred, const StereoPair& target) {
  if (pred.left.shape() != target.left.shape() ||
      pred.right.shape() != target.right.shape()) {
    throw ShapeError("l1_loss: prediction/target shape mismatch");
  }
  Tensor left = mean_all(abs(sub(pred.left, target.left)));
  Tensor right = mean_all(abs(sub(pred.right, target.right)));
  return add(left, right);
}

Tensor perceptual_loss(const StereoPair& pred, const StereoPair& target,
                       const PerceptualExtractor& extractor, const LossConfig& cfg) {
  cfg.validate();
  auto pl = extractor.features(pred.left);
  auto pr = extractor.features(pred.right);
  auto tl = extractor.features(target.left);
  auto tr = extractor.features(target.right);
  Tensor total = Tensor::zeros({1});
  const size_t taps = std::min(cfg.lambda_k.size(), pl.size());
  for (size_t k = 0; k < taps; ++k) {
    if (cfg.lambda_k[k] == 0.0) continue;
    Tensor term = add(mean_all(abs(sub(pl[k], tl[k]))), mean_all(abs(sub(pr[k], tr[k]))));
    total = add(total, mul_scalar(term, cfg.lambda_k[k]));
  }
  return total;
}

// ---------------------------------------------------------------------------
// AdamW
// ---------------------------------------------------------------------------

AdamW::AdamW(std::vector<ParamEntry> params, const AdamWConfig& cfg)
    : params_(std::move(params)), cfg_(cfg) {
  cfg_.validate();
  m_.resize(params_.size());
  v_.resize(params_.size());
  for (size_t i = 0; i < params_.size(); ++i) {
    m_[i].assign(static_cast<size_t>(params_[i].tensor.numel()), 0.0);
    v_[i].assign(static_cast<size_t>(params_[i].tensor.numel()), 0.0);
  }
}

void AdamW::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i].tensor;
    auto data = p.mutable_data();
    const bool has_grad = p.has_grad();
    std::span<const double> g;
    if (has_grad) {
      g = p.grad();
      for (double gv : g) {
        if (!std::isfinite(gv)) {
          throw DivergenceError("adamw: non-finite gradient in '" + params_[i].name + "'");
        }
      }
    }
    auto& m = m_[i];
    auto& v = v_[i];
    for (size_t j = 0; j < data.size(); ++j) {
      const double gv = has_grad ? g[j] : 0.0;
      data[j] -= cfg_.lr * cfg_.weight_decay * data[j];  // decoupled decay
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * gv;
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * gv * gv;
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      data[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

void AdamW::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

double clip_grad_norm(std::vector<ParamEntry>& params, double max_norm) {
  double sq = 0.0;
  for (auto& p : params) {
    if (!p.tensor.has_grad()) continue;
    for (double g : p.tensor.grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto& p : params) {
      if (!p.tensor.has_grad()) continue;
      for (double& g : p.tensor.mutable_grad()) g *= scale;
    }
  }
  return norm;
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

namespace {

Tensor crop_image(const Tensor& img, int64_t top, int64_t left, int64_t size) {
  const int64_t h = img.dim(1), w = img.dim(2);
  std::vector<double> out(static_cast<size_t>(3 * size * size));
  const auto d = img.data();
  for (int64_t c = 0; c < 3; ++c) {
    for (int64_t y = 0; y < size; ++y) {
      const double* src = d.data() + (c * h + top + y) * w + left;
      std::copy(src, src + size, out.data() + (c * size + y) * size);
    }
  }
  return Tensor::from_vector({3, size, size}, std::move(out));
}

Tensor stack_images(const std::vector<Tensor>& images) {
  const int64_t n = static_cast<int64_t>(images.size());
  const int64_t h = images[0].dim(1), w = images[0].dim(2);
  std::vector<double> out;
  out.reserve(static_cast<size_t>(n * 3 * h * w));
  for (const Tensor& img : images) {
    out.insert(out.end(), img.data().begin(), img.data().end());
  }
  return Tensor::from_vector({n, 3, h, w}, std::move(out));
}

}  // namespace

std::vector<TrainSample> load_samples(const std::vector<const ManifestEntry*>& entries) {
  std::vector<TrainSample> out;
  out.reserve(entries.size());
  for (const ManifestEntry* e : entries) {
    TrainSample s;
    s.clean_left = load_png(e->clean_left);
    s.clean_right = load_png(e->clean_right);
    s.degraded_left = load_png(e->degraded_left);
    s.degraded_right = load_png(e->degraded_right);
    out.push_back(std::move(s));
  }
  return out;
}

double validation_psnr(SnnsirNetwork& net, const std::vector<TrainSample>& val_set,
                       int64_t max_samples) {
  if (val_set.empty()) return 0.0;
  NoGradGuard no_grad;
  RunContext ctx;
  ctx.training = false;
  double acc = 0.0;
  int64_t n = 0;
  for (const auto& s : val_set) {
    if (n >= max_samples) break;
    StereoPair in{stack_images({s.degraded_left}), stack_images({s.degraded_right})};
    RestorationOutput out = net.forward(in, ctx);
    StereoPair pred{reshape(out.refined.left, {3, out.refined.left.dim(2),
                                               out.refined.left.dim(3)}),
                    reshape(out.refined.right, {3, out.refined.right.dim(2),
                                                out.refined.right.dim(3)})};
    StereoPair clean{s.clean_left, s.clean_right};
    acc += psnr_pair(pred, clean);
    ++n;
  }
  return acc / static_cast<double>(n);
}

TrainResult train(const std::vector<TrainSample>& train_set,
                  const std::vector<TrainSample>& val_set, SnnsirNetwork& net,
                  const TrainConfig& cfg, std::ostream* log) {
  if (train_set.empty()) throw ConfigError("train: empty dataset");
  cfg.adamw.validate();
  cfg.loss.validate();

  const bool superres = net.config().task == Task::Superres;
  const bool has_refine =
      superres || (net.config().refine_blocks > 0 && net.config().ablation.use_ssrb);
  const int sr_scale = superres ? net.config().sr_scale : 1;

  PerceptualExtractor extractor;
  AdamW opt(net.parameters(), cfg.adamw);
  Rng rng(cfg.seed);

  const std::string last_good_path =
      cfg.out_dir.empty() ? "" : cfg.out_dir + "/last_good.snir";

  TrainResult result;
  for (int64_t i = 0; i < cfg.steps; ++i) {
    const int64_t step = cfg.start_step + i + 1;

    std::vector<Tensor> cl, cr, dl, dr;
    for (int64_t b = 0; b < cfg.batch; ++b) {
      const auto& s = train_set[rng.below(train_set.size())];
      const int64_t dh = s.degraded_left.dim(1), dw = s.degraded_left.dim(2);
      const int64_t crop = std::min({cfg.crop, dh, dw});
      const int64_t top = static_cast<int64_t>(rng.below(dh - crop + 1));
      const int64_t left = static_cast<int64_t>(rng.below(dw - crop + 1));
      dl.push_back(crop_image(s.degraded_left, top, left, crop));
      dr.push_back(crop_image(s.degraded_right, top, left, crop));
      cl.push_back(crop_image(s.clean_left, top * sr_scale, left * sr_scale,
                              crop * sr_scale));
      cr.push_back(crop_image(s.clean_right, top * sr_scale, left * sr_scale,
                              crop * sr_scale));
    }
    StereoPair input{stack_images(dl), stack_images(dr)};
    StereoPair clean{stack_images(cl), stack_images(cr)};

    RunContext ctx;
    ctx.training = true;
    RestorationOutput out = net.forward(input, ctx);

    // Stage-1 pixel loss on the coarse output; refinement trains through the
    // perceptual term. The SR variant has a single output carrying both.
    Tensor loss_l1 = superres ? l1_loss(out.refined, clean) : l1_loss(out.coarse, clean);
    Tensor loss_total = loss_l1;
    double loss_p_val = 0.0;
    if (has_refine) {
      Tensor loss_p = perceptual_loss(out.refined, clean, extractor, cfg.loss);
      loss_p_val = loss_p.item();
      loss_total = add(loss_l1, loss_p);
    }
    const double l1_val = loss_l1.item();
    const double total_val = loss_total.item();
    if (!std::isfinite(total_val)) {
      if (!last_good_path.empty()) net.save_checkpoint(last_good_path, step - 1);
      throw DivergenceError("train: loss diverged at step " + std::to_string(step) +
                            (last_good_path.empty()
                                 ? ""
                                 : "; last good checkpoint: " + last_good_path));
    }

    opt.zero_grad();
    loss_total.backward();
    clip_grad_norm(net.parameters(), cfg.clip_norm);
    opt.step();

    std::optional<double> psnr_val;
    const bool val_now = !val_set.empty() && cfg.val_interval > 0 &&
                         (step % cfg.val_interval == 0 || i + 1 == cfg.steps);
    if (val_now) {
      psnr_val = validation_psnr(net, val_set, cfg.val_max_samples);
      result.last_val_psnr = *psnr_val;
    }

    if (log) {
      json rec{{"step", step}, {"loss_l1", l1_val}, {"loss_p", loss_p_val}};
      if (psnr_val) rec["psnr_val"] = *psnr_val;
      (*log) << rec.dump() << "\n";
    }

    result.final_l1 = l1_val;
    result.final_total = total_val;
    result.steps_run = i + 1;

    if (!last_good_path.empty() && cfg.checkpoint_interval > 0 &&
        step % cfg.checkpoint_interval == 0) {
      net.save_checkpoint(last_good_path, step);
    }
  }
  if (!cfg.out_dir.empty()) {
    net.save_checkpoint(cfg.out_dir + "/checkpoint.snir", cfg.start_step + cfg.steps);
  }
  return result;
}

}  // namespace snnsir
