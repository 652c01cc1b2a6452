#pragma once

#include "snnsir/tensor.hpp"

namespace snnsir {

struct LifParams {
  double tau = 2.0;     // membrane time constant
  double u_th = 0.2;    // firing threshold (0.1 in low-light mode)
  double u_rest = 0.0;  // reset / rest potential

  void validate() const;
};

/// Leaky integrate-and-fire bank over the time axis:
///   U[t] = V[t-1] + (1/tau) (X[t] - (V[t-1] - u_rest))
///   S[t] = theta(U[t] - u_th)
///   V[t] = (1 - S[t]) U[t] + S[t] u_rest
/// The spike gate in the reset is detached, so gradients flow through the
/// membrane only. V is reinitialized to u_rest at the start of every forward
/// pass; it never carries over between samples.
class LifNeuronLayer {
 public:
  LifNeuronLayer() = default;
  LifNeuronLayer(const LifParams& params, const SurrogateSpec& surrogate);

  /// x is [T*N, ...] with the time axis folded t-major into axis 0.
  SpikeTensor forward(const Tensor& x, int64_t time_steps);

  void reset_state();
  /// Final membrane potential of the last forward pass (detached), one slice
  /// of shape [N, ...]; undefined tensor before any forward.
  const Tensor& membrane() const { return v_; }
  const LifParams& params() const { return params_; }
  const SurrogateSpec& surrogate() const { return surrogate_; }

 private:
  LifParams params_;
  SurrogateSpec surrogate_;
  Tensor v_;
};

/// Free-function form of the LIF pass (stateless).
SpikeTensor lif_forward(const Tensor& x, int64_t time_steps, const LifParams& params,
                        const SurrogateSpec& surrogate, Tensor* final_membrane = nullptr);

/// Batch normalization with statistics taken jointly over the time, batch and
/// spatial axes per channel, plus a per-channel affine.
class TdBnLayer {
 public:
  TdBnLayer() = default;
  explicit TdBnLayer(int64_t channels, double eps = 1e-5, double momentum = 0.1);

  /// x is [R,C,H,W] (R = T*N). Training mode standardizes with batch
  /// statistics and updates the running buffers; eval mode uses the buffers.
  Tensor forward(const Tensor& x, bool training);

  int64_t channels() const { return channels_; }

  Tensor gamma, beta;  // learnable affine
  std::vector<double> running_mean, running_var;
  double eps = 1e-5;
  double momentum = 0.1;

 private:
  int64_t channels_ = 0;
};

}  // namespace snnsir
