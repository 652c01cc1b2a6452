#pragma once

#include <string>
#include <vector>

#include "snnsir/lif.hpp"
#include "snnsir/profiler.hpp"
#include "snnsir/tensor.hpp"

namespace snnsir {

struct ParamEntry {
  std::string name;
  Tensor tensor;
};

struct BufferEntry {
  std::string name;
  std::vector<double>* data;
};

/// Left/right features moving in lockstep; both views always share shape.
struct StereoPair {
  Tensor left, right;
};

/// Per-forward context threaded through every block.
struct RunContext {
  bool training = false;
  int64_t time_steps = 1;
  EnergyLedger* ledger = nullptr;
  std::string view;  // "l" / "r" for SFR keys on weight-shared blocks
};

struct AblationFlags {
  enum class Shortcut { Membrane, Sew };
  enum class SscmActivation { Multiplication, Sigmoid };

  Shortcut shortcut = Shortcut::Membrane;
  SscmActivation sscm_activation = SscmActivation::Multiplication;
  bool use_sscm = true;
  bool use_ssca = true;
  bool use_ssrb = true;
};

/// Plain conv wrapper owning the (bias-free) weight.
struct Conv2dLayer {
  Tensor weight;  // [cout, cin/groups, kh, kw]
  int stride = 1;
  int padding = 0;
  int groups = 1;

  static Conv2dLayer make(int64_t cout, int64_t cin, int kernel, int stride,
                          int padding, int groups, Rng& rng);
  Tensor forward(const Tensor& x) const { return conv2d(x, weight, stride, padding, groups); }
  double dense_macs_per_frame(int64_t in_h, int64_t in_w) const;
  void params(const std::string& prefix, std::vector<ParamEntry>& out);
};

/// Spike Convolution Unit: LIF -> Conv -> tdBN, so the conv input is always
/// binary. With groups == channels this is the depthwise SDU variant.
struct ScuLayer {
  std::string name;
  LifNeuronLayer lif;
  Conv2dLayer conv;
  TdBnLayer bn;

  static ScuLayer make(const std::string& name, int64_t cin, int64_t cout, int kernel,
                       int stride, int padding, int groups, const LifParams& lp,
                       const SurrogateSpec& sg, Rng& rng);
  Tensor forward(const Tensor& x, RunContext& ctx);
  void params(std::vector<ParamEntry>& out);
  void buffers(std::vector<BufferEntry>& out);
};

/// Head/tail convolution on real-valued sequences; logged under FLOPs.
struct FloatConvLayer {
  std::string name;
  Conv2dLayer conv;

  static FloatConvLayer make(const std::string& name, int64_t cin, int64_t cout,
                             int kernel, int padding, Rng& rng);
  Tensor forward(const Tensor& x, RunContext& ctx);
  void params(std::vector<ParamEntry>& out);
};

/// Spike Residual Basic Block: y = x + SCU2(SCU1(x)) with a membrane-level
/// shortcut. The SEW ablation replaces the shortcut with a binarized copy of
/// the input.
struct SrbbBlock {
  ScuLayer scu1, scu2;
  AblationFlags::Shortcut shortcut = AblationFlags::Shortcut::Membrane;
  LifNeuronLayer sew_lif;  // only touched in SEW mode

  static SrbbBlock make(const std::string& name, int64_t channels, const LifParams& lp,
                        const SurrogateSpec& sg, AblationFlags::Shortcut sc, Rng& rng);
  Tensor forward(const Tensor& x, RunContext& ctx);
  void params(std::vector<ParamEntry>& out);
  void buffers(std::vector<BufferEntry>& out);
};

/// Feature Extraction Block: two stacked SRBBs; one instance serves both
/// stereo views (weight sharing).
struct FebBlock {
  SrbbBlock srbb1, srbb2;

  static FebBlock make(const std::string& name, int64_t channels, const LifParams& lp,
                       const SurrogateSpec& sg, AblationFlags::Shortcut sc, Rng& rng);
  Tensor forward(const Tensor& x, RunContext& ctx);
  void params(std::vector<ParamEntry>& out);
  void buffers(std::vector<BufferEntry>& out);
};

/// Spike Stereo Convolutional Modulation. Channel path: F * (W GAP(F) + W GMP(F))
/// per channel; spatial path: result * SCU([GAPc, GMPc]) per pixel; the
/// modulated 2C tensor is split into per-view halves gating each view.
/// All nonlinearity comes from the multiplications (sigmoid only as ablation).
struct SscmModule {
  std::string name;
  Tensor w;  // shared linear map [2C, 2C]
  ScuLayer spatial;
  AblationFlags::SscmActivation activation = AblationFlags::SscmActivation::Multiplication;

  static SscmModule make(const std::string& name, int64_t channels, const LifParams& lp,
                         const SurrogateSpec& sg, AblationFlags::SscmActivation act,
                         Rng& rng);
  StereoPair forward(const StereoPair& p, RunContext& ctx);
  void params(std::vector<ParamEntry>& out);
  void buffers(std::vector<BufferEntry>& out);
};

/// Spike Stereo Cross-Attention: softmax-free row-wise (epipolar) attention
/// between the views, Q/K/V/output maps are 1x1 SCUs, products scaled by
/// 1/sqrt(C).
struct SscaModule {
  std::string name;
  ScuLayer wl1, wl2, wl3, wr1, wr2, wr3;
  double scale = 0.0;  // 0 -> 1/sqrt(C)

  static SscaModule make(const std::string& name, int64_t channels, const LifParams& lp,
                         const SurrogateSpec& sg, Rng& rng);
  StereoPair forward(const StereoPair& p, RunContext& ctx);
  void params(std::vector<ParamEntry>& out);
  void buffers(std::vector<BufferEntry>& out);
};

/// Spike Separable Convolution: 1x1 expand -> 3x3 depthwise -> 1x1 project.
struct SscBlock {
  ScuLayer expand, depthwise, project;

  static SscBlock make(const std::string& name, int64_t channels, int expansion,
                       const LifParams& lp, const SurrogateSpec& sg, Rng& rng);
  Tensor forward(const Tensor& x, RunContext& ctx);
  void params(std::vector<ParamEntry>& out);
  void buffers(std::vector<BufferEntry>& out);
};

/// Spike Stereo Refinement Block: per-view SSC (weights shared across views),
/// fusion SCU over the concatenated views whose halves gate each branch,
/// membrane shortcut.
struct SsrbBlock {
  std::string name;
  SscBlock ssc;
  ScuLayer fuse;

  static SsrbBlock make(const std::string& name, int64_t channels, int expansion,
                        const LifParams& lp, const SurrogateSpec& sg, Rng& rng);
  StereoPair forward(const StereoPair& p, RunContext& ctx);
  void params(std::vector<ParamEntry>& out);
  void buffers(std::vector<BufferEntry>& out);
};

/// 3x3 stride-2 SCU; halves the spatial axes, widens channels.
struct DownsampleBlock {
  ScuLayer scu;

  static DownsampleBlock make(const std::string& name, int64_t cin, int64_t cout,
                              const LifParams& lp, const SurrogateSpec& sg, Rng& rng);
  Tensor forward(const Tensor& x, RunContext& ctx);
  void params(std::vector<ParamEntry>& out);
  void buffers(std::vector<BufferEntry>& out);
};

/// Nearest-neighbor x2 followed by a 1x1 SCU to the target width.
struct UpsampleBlock {
  ScuLayer scu;

  static UpsampleBlock make(const std::string& name, int64_t cin, int64_t cout,
                            const LifParams& lp, const SurrogateSpec& sg, Rng& rng);
  Tensor forward(const Tensor& x, RunContext& ctx);
  void params(std::vector<ParamEntry>& out);
  void buffers(std::vector<BufferEntry>& out);
};

}  // namespace snnsir
