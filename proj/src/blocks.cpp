#include "snnsir/blocks.hpp"

#include <cmath>

namespace snnsir {

namespace {

void check_pair(const StereoPair& p, const char* where) {
  if (!p.left.defined() || !p.right.defined()) {
    throw ValueError(std::string(where) + ": undefined view");
  }
  if (p.left.shape() != p.right.shape()) {
    throw ShapeError(std::string(where) + ": views differ, " + shape_str(p.left.shape()) +
                     " vs " + shape_str(p.right.shape()));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Conv / SCU / float conv
// ---------------------------------------------------------------------------

Conv2dLayer Conv2dLayer::make(int64_t cout, int64_t cin, int kernel, int stride,
                              int padding, int groups, Rng& rng) {
  Conv2dLayer l;
  const int64_t cin_g = cin / groups;
  const double fan_in = static_cast<double>(cin_g) * kernel * kernel;
  const double stddev = std::sqrt(2.0 / fan_in);
  l.weight = Tensor::randn({cout, cin_g, kernel, kernel}, rng, stddev, true);
  l.stride = stride;
  l.padding = padding;
  l.groups = groups;
  return l;
}

double Conv2dLayer::dense_macs_per_frame(int64_t in_h, int64_t in_w) const {
  const int64_t oh = conv2d_out_dim(in_h, weight.dim(2), stride, padding);
  const int64_t ow = conv2d_out_dim(in_w, weight.dim(3), stride, padding);
  return conv_dense_macs(weight.dim(0), weight.dim(1), weight.dim(2), weight.dim(3), oh, ow);
}

void Conv2dLayer::params(const std::string& prefix, std::vector<ParamEntry>& out) {
  out.push_back({prefix + ".weight", weight});
}

ScuLayer ScuLayer::make(const std::string& name, int64_t cin, int64_t cout, int kernel,
                        int stride, int padding, int groups, const LifParams& lp,
                        const SurrogateSpec& sg, Rng& rng) {
  ScuLayer l;
  l.name = name;
  l.lif = LifNeuronLayer(lp, sg);
  l.conv = Conv2dLayer::make(cout, cin, kernel, stride, padding, groups, rng);
  l.bn = TdBnLayer(cout);
  return l;
}

Tensor ScuLayer::forward(const Tensor& x, RunContext& ctx) {
  SpikeTensor s = lif.forward(x, ctx.time_steps);
  if (ctx.ledger) {
    const int64_t n = x.dim(0) / ctx.time_steps;
    const double macs =
        conv.dense_macs_per_frame(x.dim(2), x.dim(3)) * static_cast<double>(n);
    ctx.ledger->record_spike_layer(name, OpKind::Conv, macs, s, ctx.time_steps);
    ctx.ledger->record_sfr(name, ctx.view, s, ctx.time_steps);
  }
  return bn.forward(conv.forward(s.values), ctx.training);
}

void ScuLayer::params(std::vector<ParamEntry>& out) {
  conv.params(name + ".conv", out);
  out.push_back({name + ".bn.gamma", bn.gamma});
  out.push_back({name + ".bn.beta", bn.beta});
}

void ScuLayer::buffers(std::vector<BufferEntry>& out) {
  out.push_back({name + ".bn.running_mean", &bn.running_mean});
  out.push_back({name + ".bn.running_var", &bn.running_var});
}

FloatConvLayer FloatConvLayer::make(const std::string& name, int64_t cin, int64_t cout,
                                    int kernel, int padding, Rng& rng) {
  FloatConvLayer l;
  l.name = name;
  l.conv = Conv2dLayer::make(cout, cin, kernel, 1, padding, 1, rng);
  return l;
}

Tensor FloatConvLayer::forward(const Tensor& x, RunContext& ctx) {
  if (ctx.ledger) {
    const double macs =
        conv.dense_macs_per_frame(x.dim(2), x.dim(3)) * static_cast<double>(x.dim(0));
    ctx.ledger->record_float_layer(name, OpKind::Conv, macs);
  }
  return conv.forward(x);
}

void FloatConvLayer::params(std::vector<ParamEntry>& out) {
  conv.params(name + ".conv", out);
}

// ---------------------------------------------------------------------------
// SRBB / FEB
// ---------------------------------------------------------------------------

SrbbBlock SrbbBlock::make(const std::string& name, int64_t channels, const LifParams& lp,
                          const SurrogateSpec& sg, AblationFlags::Shortcut sc, Rng& rng) {
  SrbbBlock b;
  b.scu1 = ScuLayer::make(name + ".scu1", channels, channels, 3, 1, 1, 1, lp, sg, rng);
  b.scu2 = ScuLayer::make(name + ".scu2", channels, channels, 3, 1, 1, 1, lp, sg, rng);
  b.shortcut = sc;
  b.sew_lif = LifNeuronLayer(lp, sg);
  return b;
}

Tensor SrbbBlock::forward(const Tensor& x, RunContext& ctx) {
  Tensor body = scu2.forward(scu1.forward(x, ctx), ctx);
  if (shortcut == AblationFlags::Shortcut::Membrane) {
    return add(x, body);
  }
  // SEW ablation: the shortcut carries spikes instead of the membrane signal.
  SpikeTensor s = sew_lif.forward(x, ctx.time_steps);
  return add(s.values, body);
}

void SrbbBlock::params(std::vector<ParamEntry>& out) {
  scu1.params(out);
  scu2.params(out);
}

void SrbbBlock::buffers(std::vector<BufferEntry>& out) {
  scu1.buffers(out);
  scu2.buffers(out);
}

FebBlock FebBlock::make(const std::string& name, int64_t channels, const LifParams& lp,
                        const SurrogateSpec& sg, AblationFlags::Shortcut sc, Rng& rng) {
  FebBlock b;
  b.srbb1 = SrbbBlock::make(name + ".srbb1", channels, lp, sg, sc, rng);
  b.srbb2 = SrbbBlock::make(name + ".srbb2", channels, lp, sg, sc, rng);
  return b;
}

Tensor FebBlock::forward(const Tensor& x, RunContext& ctx) {
  return srbb2.forward(srbb1.forward(x, ctx), ctx);
}

void FebBlock::params(std::vector<ParamEntry>& out) {
  srbb1.params(out);
  srbb2.params(out);
}

void FebBlock::buffers(std::vector<BufferEntry>& out) {
  srbb1.buffers(out);
  srbb2.buffers(out);
}

// ---------------------------------------------------------------------------
// SSCM
// ---------------------------------------------------------------------------

SscmModule SscmModule::make(const std::string& name, int64_t channels, const LifParams& lp,
                            const SurrogateSpec& sg, AblationFlags::SscmActivation act,
                            Rng& rng) {
  SscmModule m;
  m.name = name;
  const int64_t c2 = 2 * channels;
  m.w = Tensor::randn({c2, c2}, rng, std::sqrt(1.0 / static_cast<double>(c2)), true);
  m.spatial = ScuLayer::make(name + ".spatial", 2, 1, 3, 1, 1, 1, lp, sg, rng);
  m.activation = act;
  return m;
}

StereoPair SscmModule::forward(const StereoPair& p, RunContext& ctx) {
  check_pair(p, "sscm");
  const int64_t rows = p.left.dim(0), c = p.left.dim(1);
  const int64_t h = p.left.dim(2), wd = p.left.dim(3);

  Tensor f = concat({p.left, p.right}, 1);  // [R, 2C, H, W]
  // channel path
  Tensor gap = mean_axis(mean_axis(f, 3), 2);  // [R, 2C]
  Tensor gmp = max_axis(max_axis(f, 3), 2);
  Tensor gates = add(linear(gap, w), linear(gmp, w));
  if (activation == AblationFlags::SscmActivation::Sigmoid) gates = sigmoid(gates);
  Tensor f1 = mul_channel(f, gates);
  // spatial path
  Tensor gapc = reshape(mean_axis(f1, 1), {rows, 1, h, wd});
  Tensor gmpc = reshape(max_axis(f1, 1), {rows, 1, h, wd});
  Tensor sp = spatial.forward(concat({gapc, gmpc}, 1), ctx);
  if (activation == AblationFlags::SscmActivation::Sigmoid) sp = sigmoid(sp);
  Tensor f2 = mul_spatial(f1, sp);

  Tensor m_l = slice_channels(f2, 0, c);
  Tensor m_r = slice_channels(f2, c, 2 * c);
  StereoPair out;
  out.left = add(mul(m_l, p.left), p.left);
  out.right = add(mul(m_r, p.right), p.right);

  if (ctx.ledger) {
    const double frames = static_cast<double>(rows);
    ctx.ledger->record_float_layer(name + ".w", OpKind::Linear,
                                   2.0 * linear_dense_macs(2 * c, 2 * c) * frames);
    // float*float elementwise products: channel gate, spatial gate, view gates
    const double elt = frames * static_cast<double>(2 * c * h * wd) * 3.0;
    ctx.ledger->record_float_layer(name + ".modulation", OpKind::Eltwise, elt);
  }
  return out;
}

void SscmModule::params(std::vector<ParamEntry>& out) {
  out.push_back({name + ".w", w});
  spatial.params(out);
}

void SscmModule::buffers(std::vector<BufferEntry>& out) { spatial.buffers(out); }

// ---------------------------------------------------------------------------
// SSCA
// ---------------------------------------------------------------------------

SscaModule SscaModule::make(const std::string& name, int64_t channels, const LifParams& lp,
                            const SurrogateSpec& sg, Rng& rng) {
  SscaModule m;
  m.name = name;
  auto scu = [&](const char* suffix) {
    return ScuLayer::make(name + "." + suffix, channels, channels, 1, 1, 0, 1, lp, sg, rng);
  };
  m.wl1 = scu("wl1");
  m.wl2 = scu("wl2");
  m.wl3 = scu("wl3");
  m.wr1 = scu("wr1");
  m.wr2 = scu("wr2");
  m.wr3 = scu("wr3");
  return m;
}

StereoPair SscaModule::forward(const StereoPair& p, RunContext& ctx) {
  check_pair(p, "ssca");
  const int64_t rows = p.left.dim(0), c = p.left.dim(1);
  const int64_t h = p.left.dim(2), wd = p.left.dim(3);

  const std::string saved_view = ctx.view;
  ctx.view = "l";
  Tensor q = wl1.forward(p.left, ctx);
  Tensor vl = wl2.forward(p.left, ctx);
  ctx.view = "r";
  Tensor k = wr1.forward(p.right, ctx);
  Tensor vr = wr2.forward(p.right, ctx);
  ctx.view = saved_view;

  // Rows are epipolar lines: [R,C,H,W] -> [R*H, W, C].
  auto to_rows = [&](const Tensor& t) {
    return reshape(permute(t, {0, 2, 3, 1}), {rows * h, wd, c});
  };
  auto from_rows = [&](const Tensor& t) {
    return permute(reshape(t, {rows, h, wd, c}), {0, 3, 1, 2});
  };

  const double sc = scale > 0.0 ? scale : 1.0 / std::sqrt(static_cast<double>(c));
  Tensor attn = mul_scalar(bmm(to_rows(q), to_rows(k), false, true), sc);
  Tensor out_l_rows = bmm(attn, to_rows(vr));
  Tensor out_r_rows = bmm(attn, to_rows(vl), true, false);

  ctx.view = "l";
  Tensor out_l = add(wl3.forward(from_rows(out_l_rows), ctx), p.left);
  ctx.view = "r";
  Tensor out_r = add(wr3.forward(from_rows(out_r_rows), ctx), p.right);
  ctx.view = saved_view;

  if (ctx.ledger) {
    ctx.ledger->record_float_layer(name + ".attn", OpKind::Matmul,
                                   attention_dense_macs(rows * h, wd, c, 2));
  }
  return {out_l, out_r};
}

void SscaModule::params(std::vector<ParamEntry>& out) {
  wl1.params(out);
  wl2.params(out);
  wl3.params(out);
  wr1.params(out);
  wr2.params(out);
  wr3.params(out);
}

void SscaModule::buffers(std::vector<BufferEntry>& out) {
  wl1.buffers(out);
  wl2.buffers(out);
  wl3.buffers(out);
  wr1.buffers(out);
  wr2.buffers(out);
  wr3.buffers(out);
}

// ---------------------------------------------------------------------------
// SSC / SSRB
// ---------------------------------------------------------------------------

SscBlock SscBlock::make(const std::string& name, int64_t channels, int expansion,
                        const LifParams& lp, const SurrogateSpec& sg, Rng& rng) {
  SscBlock b;
  const int64_t mid = channels * expansion;
  b.expand = ScuLayer::make(name + ".expand", channels, mid, 1, 1, 0, 1, lp, sg, rng);
  b.depthwise = ScuLayer::make(name + ".dw", mid, mid, 3, 1, 1,
                               static_cast<int>(mid), lp, sg, rng);
  b.project = ScuLayer::make(name + ".project", mid, channels, 1, 1, 0, 1, lp, sg, rng);
  return b;
}

Tensor SscBlock::forward(const Tensor& x, RunContext& ctx) {
  return project.forward(depthwise.forward(expand.forward(x, ctx), ctx), ctx);
}

void SscBlock::params(std::vector<ParamEntry>& out) {
  expand.params(out);
  depthwise.params(out);
  project.params(out);
}

void SscBlock::buffers(std::vector<BufferEntry>& out) {
  expand.buffers(out);
  depthwise.buffers(out);
  project.buffers(out);
}

SsrbBlock SsrbBlock::make(const std::string& name, int64_t channels, int expansion,
                          const LifParams& lp, const SurrogateSpec& sg, Rng& rng) {
  SsrbBlock b;
  b.name = name;
  b.ssc = SscBlock::make(name + ".ssc", channels, expansion, lp, sg, rng);
  b.fuse = ScuLayer::make(name + ".fuse", 2 * channels, 2 * channels, 1, 1, 0, 1, lp, sg, rng);
  return b;
}

StereoPair SsrbBlock::forward(const StereoPair& p, RunContext& ctx) {
  check_pair(p, "ssrb");
  const int64_t c = p.left.dim(1);
  const std::string saved_view = ctx.view;
  ctx.view = "l";
  Tensor g_l = ssc.forward(p.left, ctx);
  ctx.view = "r";
  Tensor g_r = ssc.forward(p.right, ctx);
  ctx.view = saved_view;
  Tensor m = fuse.forward(concat({g_l, g_r}, 1), ctx);
  Tensor m_l = slice_channels(m, 0, c);
  Tensor m_r = slice_channels(m, c, 2 * c);
  StereoPair out;
  out.left = add(mul(m_l, g_l), p.left);
  out.right = add(mul(m_r, g_r), p.right);
  if (ctx.ledger) {
    ctx.ledger->record_float_layer(name + ".modulation", OpKind::Eltwise,
                                   static_cast<double>(2 * p.left.numel()));
  }
  return out;
}

void SsrbBlock::params(std::vector<ParamEntry>& out) {
  ssc.params(out);
  fuse.params(out);
}

void SsrbBlock::buffers(std::vector<BufferEntry>& out) {
  ssc.buffers(out);
  fuse.buffers(out);
}

// ---------------------------------------------------------------------------
// Resampling blocks
// ---------------------------------------------------------------------------

DownsampleBlock DownsampleBlock::make(const std::string& name, int64_t cin, int64_t cout,
                                      const LifParams& lp, const SurrogateSpec& sg,
                                      Rng& rng) {
  DownsampleBlock b;
  b.scu = ScuLayer::make(name, cin, cout, 3, 2, 1, 1, lp, sg, rng);
  return b;
}

Tensor DownsampleBlock::forward(const Tensor& x, RunContext& ctx) {
  return scu.forward(x, ctx);
}

void DownsampleBlock::params(std::vector<ParamEntry>& out) { scu.params(out); }
void DownsampleBlock::buffers(std::vector<BufferEntry>& out) { scu.buffers(out); }

UpsampleBlock UpsampleBlock::make(const std::string& name, int64_t cin, int64_t cout,
                                  const LifParams& lp, const SurrogateSpec& sg, Rng& rng) {
  UpsampleBlock b;
  b.scu = ScuLayer::make(name, cin, cout, 1, 1, 0, 1, lp, sg, rng);
  return b;
}

Tensor UpsampleBlock::forward(const Tensor& x, RunContext& ctx) {
  return scu.forward(nearest_upsample(x, 2), ctx);
}

void UpsampleBlock::params(std::vector<ParamEntry>& out) { scu.params(out); }
void UpsampleBlock::buffers(std::vector<BufferEntry>& out) { scu.buffers(out); }

}  // namespace snnsir
