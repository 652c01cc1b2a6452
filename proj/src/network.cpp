#include "snnsir/network.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

#include "json.hpp"

namespace snnsir {

using nlohmann::json;

const char* task_name(Task t) {
  switch (t) {
    case Task::Raindrop: return "raindrop";
    case Task::Rainstreak: return "rainstreak";
    case Task::Lowlight: return "lowlight";
    case Task::Superres: return "superres";
  }
  return "?";
}

Task task_from_name(const std::string& name) {
  if (name == "raindrop") return Task::Raindrop;
  if (name == "rainstreak") return Task::Rainstreak;
  if (name == "lowlight") return Task::Lowlight;
  if (name == "superres") return Task::Superres;
  throw ConfigError("unknown task '" + name + "'");
}

void NetworkConfig::validate() const {
  if (channels.size() < 2) throw ConfigError("config: need at least 2 channel entries");
  for (size_t i = 1; i < channels.size(); ++i) {
    if (channels[i] <= channels[i - 1]) {
      throw ConfigError("config: channels must be strictly increasing");
    }
  }
  if (time_steps < 1) throw ConfigError("config: time_steps must be >= 1");
  if (refine_blocks < 0) throw ConfigError("config: refine_blocks must be >= 0");
  if (task == Task::Superres && sr_scale != 2 && sr_scale != 4) {
    throw ConfigError("config: sr_scale must be 2 or 4");
  }
  if (ssc_expansion < 1) throw ConfigError("config: ssc_expansion must be >= 1");
  lif_params().validate();
  surrogate.validate();
}

NetworkConfig NetworkConfig::for_task(Task t) {
  NetworkConfig cfg;
  cfg.task = t;
  cfg.u_th = (t == Task::Lowlight) ? 0.1 : 0.2;
  return cfg;
}

std::string NetworkConfig::to_json() const {
  json j;
  j["channels"] = channels;
  j["time_steps"] = time_steps;
  j["u_th"] = u_th;
  j["u_rest"] = u_rest;
  j["tau"] = tau;
  j["refine_blocks"] = refine_blocks;
  j["refine_channels"] = refine_channels;
  j["task"] = task_name(task);
  j["sr_scale"] = sr_scale;
  j["sr_trunk_blocks"] = sr_trunk_blocks;
  j["ssc_expansion"] = ssc_expansion;
  j["surrogate"] = {{"kind", surrogate.kind == SurrogateSpec::Kind::Arctan
                                 ? "arctan"
                                 : "rectangular"},
                    {"alpha", surrogate.alpha}};
  j["ablation"] = {
      {"shortcut",
       ablation.shortcut == AblationFlags::Shortcut::Membrane ? "membrane" : "sew"},
      {"sscm_activation",
       ablation.sscm_activation == AblationFlags::SscmActivation::Multiplication
           ? "multiplication"
           : "sigmoid"},
      {"use_sscm", ablation.use_sscm},
      {"use_ssca", ablation.use_ssca},
      {"use_ssrb", ablation.use_ssrb}};
  return j.dump(2);
}

NetworkConfig NetworkConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  NetworkConfig cfg;
  try {
    if (j.contains("channels")) cfg.channels = j["channels"].get<std::vector<int64_t>>();
    if (j.contains("time_steps")) cfg.time_steps = j["time_steps"].get<int64_t>();
    if (j.contains("u_th")) cfg.u_th = j["u_th"].get<double>();
    if (j.contains("u_rest")) cfg.u_rest = j["u_rest"].get<double>();
    if (j.contains("tau")) cfg.tau = j["tau"].get<double>();
    if (j.contains("refine_blocks")) cfg.refine_blocks = j["refine_blocks"].get<int>();
    if (j.contains("refine_channels"))
      cfg.refine_channels = j["refine_channels"].get<int64_t>();
    if (j.contains("task")) cfg.task = task_from_name(j["task"].get<std::string>());
    if (j.contains("sr_scale")) cfg.sr_scale = j["sr_scale"].get<int>();
    if (j.contains("sr_trunk_blocks"))
      cfg.sr_trunk_blocks = j["sr_trunk_blocks"].get<int>();
    if (j.contains("ssc_expansion")) cfg.ssc_expansion = j["ssc_expansion"].get<int>();
    if (j.contains("surrogate")) {
      const auto& s = j["surrogate"];
      if (s.contains("kind")) {
        const std::string k = s["kind"].get<std::string>();
        if (k == "arctan") {
          cfg.surrogate.kind = SurrogateSpec::Kind::Arctan;
        } else if (k == "rectangular") {
          cfg.surrogate.kind = SurrogateSpec::Kind::Rectangular;
        } else {
          throw ConfigError("config: unknown surrogate kind '" + k + "'");
        }
      }
      if (s.contains("alpha")) cfg.surrogate.alpha = s["alpha"].get<double>();
    }
    if (j.contains("ablation")) {
      const auto& a = j["ablation"];
      if (a.contains("shortcut")) {
        const std::string s = a["shortcut"].get<std::string>();
        cfg.ablation.shortcut = s == "sew" ? AblationFlags::Shortcut::Sew
                                           : AblationFlags::Shortcut::Membrane;
      }
      if (a.contains("sscm_activation")) {
        const std::string s = a["sscm_activation"].get<std::string>();
        cfg.ablation.sscm_activation =
            s == "sigmoid" ? AblationFlags::SscmActivation::Sigmoid
                           : AblationFlags::SscmActivation::Multiplication;
      }
      if (a.contains("use_sscm")) cfg.ablation.use_sscm = a["use_sscm"].get<bool>();
      if (a.contains("use_ssca")) cfg.ablation.use_ssca = a["use_ssca"].get<bool>();
      if (a.contains("use_ssrb")) cfg.ablation.use_ssrb = a["use_ssrb"].get<bool>();
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: bad field: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

SnnsirNetwork::SnnsirNetwork(const NetworkConfig& cfg, uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  build(seed);
}

void SnnsirNetwork::build(uint64_t seed) {
  Rng rng(seed);
  const LifParams lp = cfg_.lif_params();
  const SurrogateSpec& sg = cfg_.surrogate;
  const auto sc = cfg_.ablation.shortcut;
  const auto act = cfg_.ablation.sscm_activation;

  if (cfg_.task == Task::Superres) {
    const int64_t c = cfg_.refine_channels;
    sr_head_ = FloatConvLayer::make("sr.head", 3, c, 3, 1, rng);
    for (int k = 0; k < cfg_.sr_trunk_blocks; ++k) {
      const std::string base = "sr.block" + std::to_string(k);
      SrBlock b{FebBlock::make(base + ".feb", c, lp, sg, sc, rng),
                SscmModule::make(base + ".sscm", c, lp, sg, act, rng),
                SscaModule::make(base + ".ssca", c, lp, sg, rng)};
      sr_trunk_.push_back(std::move(b));
    }
    const int64_t out_c = 3 * cfg_.sr_scale * cfg_.sr_scale;
    sr_tail_ = FloatConvLayer::make("sr.tail", c, out_c, 3, 1, rng);

    sr_head_.params(params_);
    for (auto& b : sr_trunk_) {
      b.feb.params(params_);
      b.sscm.params(params_);
      b.ssca.params(params_);
      b.feb.buffers(buffers_);
      b.sscm.buffers(buffers_);
      b.ssca.buffers(buffers_);
    }
    sr_tail_.params(params_);
    return;
  }

  const auto& ch = cfg_.channels;
  const int levels = static_cast<int>(ch.size());
  head1_ = FloatConvLayer::make("stage1.head", 3, ch[0], 3, 1, rng);
  for (int i = 0; i < levels; ++i) {
    const std::string base = "stage1.enc" + std::to_string(i);
    EncLevel lvl{FebBlock::make(base + ".feb", ch[i], lp, sg, sc, rng),
                 SscmModule::make(base + ".sscm", ch[i], lp, sg, act, rng)};
    enc_.push_back(std::move(lvl));
    if (i + 1 < levels) {
      down_.push_back(DownsampleBlock::make("stage1.down" + std::to_string(i), ch[i],
                                            ch[i + 1], lp, sg, rng));
    }
  }
  bottleneck_ssca_ = SscaModule::make("stage1.bottleneck.ssca", ch[levels - 1], lp, sg, rng);
  for (int i = levels - 2; i >= 0; --i) {
    const std::string base = "stage1.dec" + std::to_string(i);
    DecLevel lvl{UpsampleBlock::make(base + ".up", ch[i + 1], ch[i], lp, sg, rng),
                 FebBlock::make(base + ".feb", ch[i], lp, sg, sc, rng),
                 SscmModule::make(base + ".sscm", ch[i], lp, sg, act, rng),
                 SscaModule::make(base + ".ssca", ch[i], lp, sg, rng)};
    dec_.push_back(std::move(lvl));
  }
  tail1_ = FloatConvLayer::make("stage1.tail", ch[0], 3, 3, 1, rng);

  const bool stage2 = cfg_.refine_blocks > 0 && cfg_.ablation.use_ssrb;
  if (stage2) {
    const int64_t rc = cfg_.refine_channels;
    head2_ = FloatConvLayer::make("stage2.head", 3, rc, 3, 1, rng);
    for (int k = 0; k < cfg_.refine_blocks; ++k) {
      refine_.push_back(SsrbBlock::make("stage2.ssrb" + std::to_string(k), rc,
                                        cfg_.ssc_expansion, lp, sg, rng));
    }
    tail2_ = FloatConvLayer::make("stage2.tail", rc, 3, 3, 1, rng);
  }

  head1_.params(params_);
  for (size_t i = 0; i < enc_.size(); ++i) {
    enc_[i].feb.params(params_);
    enc_[i].sscm.params(params_);
    enc_[i].feb.buffers(buffers_);
    enc_[i].sscm.buffers(buffers_);
    if (i < down_.size()) {
      down_[i].params(params_);
      down_[i].buffers(buffers_);
    }
  }
  bottleneck_ssca_.params(params_);
  bottleneck_ssca_.buffers(buffers_);
  for (auto& d : dec_) {
    d.up.params(params_);
    d.feb.params(params_);
    d.sscm.params(params_);
    d.ssca.params(params_);
    d.up.buffers(buffers_);
    d.feb.buffers(buffers_);
    d.sscm.buffers(buffers_);
    d.ssca.buffers(buffers_);
  }
  tail1_.params(params_);
  if (stage2) {
    head2_.params(params_);
    for (auto& b : refine_) {
      b.params(params_);
      b.buffers(buffers_);
    }
    tail2_.params(params_);
  }
}

int64_t SnnsirNetwork::parameter_count() const {
  int64_t n = 0;
  for (const auto& p : params_) n += p.tensor.numel();
  return n;
}

// ---------------------------------------------------------------------------
// Forward
// ---------------------------------------------------------------------------

namespace {

void check_images(const StereoPair& p, const char* where) {
  if (!p.left.defined() || !p.right.defined() || p.left.ndim() != 4 ||
      p.left.dim(1) != 3) {
    throw ShapeError(std::string(where) + ": expected [N,3,H,W] stereo views");
  }
  if (p.left.shape() != p.right.shape()) {
    throw ShapeError(std::string(where) + ": views differ in shape");
  }
}

}  // namespace

StereoPair SnnsirNetwork::forward_stage1(const StereoPair& input, RunContext& ctx) {
  check_images(input, "stage1");
  const int64_t h = input.left.dim(2), w = input.left.dim(3);
  const int64_t divisor = int64_t{1} << (cfg_.channels.size() - 1);
  const int pad_h = static_cast<int>((divisor - h % divisor) % divisor);
  const int pad_w = static_cast<int>((divisor - w % divisor) % divisor);

  StereoPair in = input;
  if (pad_h || pad_w) {
    std::fprintf(stderr,
                 "snnsir: stage1 input %lldx%lld not divisible by %lld; "
                 "reflect-padding to %lldx%lld and cropping the output\n",
                 static_cast<long long>(h), static_cast<long long>(w),
                 static_cast<long long>(divisor), static_cast<long long>(h + pad_h),
                 static_cast<long long>(w + pad_w));
    in.left = pad2d(input.left, 0, pad_h, 0, pad_w, PadMode::Reflect);
    in.right = pad2d(input.right, 0, pad_h, 0, pad_w, PadMode::Reflect);
  }

  const int64_t t = cfg_.time_steps;
  ctx.time_steps = t;
  StereoPair x;
  ctx.view = "l";
  x.left = head1_.forward(temporal_replicate(in.left, t), ctx);
  ctx.view = "r";
  x.right = head1_.forward(temporal_replicate(in.right, t), ctx);

  const int levels = static_cast<int>(cfg_.channels.size());
  std::vector<StereoPair> skips;
  for (int i = 0; i < levels - 1; ++i) {
    ctx.view = "l";
    x.left = enc_[i].feb.forward(x.left, ctx);
    ctx.view = "r";
    x.right = enc_[i].feb.forward(x.right, ctx);
    if (cfg_.ablation.use_sscm) x = enc_[i].sscm.forward(x, ctx);
    skips.push_back(x);
    ctx.view = "l";
    x.left = down_[i].forward(x.left, ctx);
    ctx.view = "r";
    x.right = down_[i].forward(x.right, ctx);
  }
  ctx.view = "l";
  x.left = enc_[levels - 1].feb.forward(x.left, ctx);
  ctx.view = "r";
  x.right = enc_[levels - 1].feb.forward(x.right, ctx);
  if (cfg_.ablation.use_sscm) x = enc_[levels - 1].sscm.forward(x, ctx);
  if (cfg_.ablation.use_ssca) x = bottleneck_ssca_.forward(x, ctx);

  for (size_t j = 0; j < dec_.size(); ++j) {
    const int i = levels - 2 - static_cast<int>(j);
    ctx.view = "l";
    x.left = dec_[j].up.forward(x.left, ctx);
    ctx.view = "r";
    x.right = dec_[j].up.forward(x.right, ctx);
    x.left = add(x.left, skips[i].left);
    x.right = add(x.right, skips[i].right);
    ctx.view = "l";
    x.left = dec_[j].feb.forward(x.left, ctx);
    ctx.view = "r";
    x.right = dec_[j].feb.forward(x.right, ctx);
    if (cfg_.ablation.use_sscm) x = dec_[j].sscm.forward(x, ctx);
    if (cfg_.ablation.use_ssca) x = dec_[j].ssca.forward(x, ctx);
  }

  ctx.view = "l";
  Tensor o_l = temporal_mean(tail1_.forward(x.left, ctx), t);
  ctx.view = "r";
  Tensor o_r = temporal_mean(tail1_.forward(x.right, ctx), t);
  ctx.view.clear();
  if (pad_h || pad_w) {
    o_l = crop2d(o_l, 0, 0, h, w);
    o_r = crop2d(o_r, 0, 0, h, w);
  }
  return {add(input.left, o_l), add(input.right, o_r)};
}

StereoPair SnnsirNetwork::forward_stage2(const StereoPair& coarse, RunContext& ctx) {
  check_images(coarse, "stage2");
  const int64_t t = cfg_.time_steps;
  ctx.time_steps = t;
  StereoPair x;
  ctx.view = "l";
  x.left = head2_.forward(temporal_replicate(coarse.left, t), ctx);
  ctx.view = "r";
  x.right = head2_.forward(temporal_replicate(coarse.right, t), ctx);
  for (auto& b : refine_) x = b.forward(x, ctx);
  ctx.view = "l";
  Tensor o_l = temporal_mean(tail2_.forward(x.left, ctx), t);
  ctx.view = "r";
  Tensor o_r = temporal_mean(tail2_.forward(x.right, ctx), t);
  ctx.view.clear();
  return {add(coarse.left, o_l), add(coarse.right, o_r)};
}

StereoPair SnnsirNetwork::forward_superres(const StereoPair& input, RunContext& ctx) {
  check_images(input, "superres");
  const int s = cfg_.sr_scale;
  const int64_t h = input.left.dim(2), w = input.left.dim(3);
  StereoPair base{bicubic_resize(input.left, h * s, w * s),
                  bicubic_resize(input.right, h * s, w * s)};
  const int64_t t = cfg_.time_steps;
  ctx.time_steps = t;
  StereoPair x;
  ctx.view = "l";
  x.left = sr_head_.forward(temporal_replicate(input.left, t), ctx);
  ctx.view = "r";
  x.right = sr_head_.forward(temporal_replicate(input.right, t), ctx);
  for (auto& b : sr_trunk_) {
    ctx.view = "l";
    x.left = b.feb.forward(x.left, ctx);
    ctx.view = "r";
    x.right = b.feb.forward(x.right, ctx);
    if (cfg_.ablation.use_sscm) x = b.sscm.forward(x, ctx);
    if (cfg_.ablation.use_ssca) x = b.ssca.forward(x, ctx);
  }
  ctx.view = "l";
  Tensor y_l = temporal_mean(sr_tail_.forward(x.left, ctx), t);
  ctx.view = "r";
  Tensor y_r = temporal_mean(sr_tail_.forward(x.right, ctx), t);
  ctx.view.clear();
  return {add(base.left, pixel_shuffle(y_l, s)), add(base.right, pixel_shuffle(y_r, s))};
}

RestorationOutput SnnsirNetwork::forward(const StereoPair& input, RunContext& ctx) {
  check_images(input, "forward");
  if (ctx.ledger) ctx.ledger->add_samples(input.left.dim(0));
  RestorationOutput out;
  if (cfg_.task == Task::Superres) {
    const int s = cfg_.sr_scale;
    const int64_t h = input.left.dim(2), w = input.left.dim(3);
    out.coarse = {bicubic_resize(input.left, h * s, w * s),
                  bicubic_resize(input.right, h * s, w * s)};
    out.refined = forward_superres(input, ctx);
    return out;
  }
  out.coarse = forward_stage1(input, ctx);
  if (cfg_.refine_blocks > 0 && cfg_.ablation.use_ssrb) {
    out.refined = forward_stage2(out.coarse, ctx);
  } else {
    out.refined = out.coarse;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoint I/O: "SNIR" magic, version, config echo, step, named f32 blobs.
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'S', 'N', 'I', 'R'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void write_i64(std::ostream& os, int64_t v) {
  auto u = static_cast<uint64_t>(v);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((u >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 8);
}

void write_f32(std::ostream& os, float v) {
  uint32_t u;
  std::memcpy(&u, &v, 4);
  write_u32(os, u);
}

uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw IoError("checkpoint: truncated file");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

int64_t read_i64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw IoError("checkpoint: truncated file");
  uint64_t u = 0;
  for (int i = 0; i < 8; ++i) u |= static_cast<uint64_t>(b[i]) << (8 * i);
  return static_cast<int64_t>(u);
}

float read_f32(std::istream& is) {
  const uint32_t u = read_u32(is);
  float v;
  std::memcpy(&v, &u, 4);
  return v;
}

void write_string(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is) {
  const uint32_t len = read_u32(is);
  std::string s(len, '\0');
  is.read(s.data(), len);
  if (!is) throw IoError("checkpoint: truncated string");
  return s;
}

void write_blob(std::ostream& os, const std::string& name, const Shape& shape,
                std::span<const double> data) {
  write_string(os, name);
  write_u32(os, static_cast<uint32_t>(shape.size()));
  for (int64_t d : shape) write_i64(os, d);
  for (double v : data) write_f32(os, static_cast<float>(v));
}

}  // namespace

void SnnsirNetwork::save_checkpoint(const std::string& path, int64_t step) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("checkpoint: cannot open '" + path + "' for writing");
  os.write(kMagic, 4);
  write_u32(os, kVersion);
  write_string(os, cfg_.to_json());
  write_i64(os, step);
  write_u32(os, static_cast<uint32_t>(params_.size()));
  for (const auto& p : params_) write_blob(os, p.name, p.tensor.shape(), p.tensor.data());
  write_u32(os, static_cast<uint32_t>(buffers_.size()));
  for (const auto& b : buffers_) {
    write_blob(os, b.name, {static_cast<int64_t>(b.data->size())},
               {b.data->data(), b.data->size()});
  }
  if (!os) throw IoError("checkpoint: write failed for '" + path + "'");
}

std::unique_ptr<SnnsirNetwork> SnnsirNetwork::load_checkpoint(const std::string& path,
                                                              int64_t* step) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("checkpoint: cannot open '" + path + "'");
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) {
    throw IoError("checkpoint: bad magic in '" + path + "'");
  }
  const uint32_t version = read_u32(is);
  if (version != kVersion) {
    throw IoError("checkpoint: unsupported version " + std::to_string(version));
  }
  const NetworkConfig cfg = NetworkConfig::from_json(read_string(is));
  const int64_t saved_step = read_i64(is);
  if (step) *step = saved_step;

  auto net = std::make_unique<SnnsirNetwork>(cfg, /*seed=*/0);

  const uint32_t n_params = read_u32(is);
  if (n_params != net->params_.size()) {
    throw IoError("checkpoint: parameter count mismatch (" + std::to_string(n_params) +
                  " stored, " + std::to_string(net->params_.size()) + " expected)");
  }
  for (uint32_t i = 0; i < n_params; ++i) {
    const std::string name = read_string(is);
    if (name != net->params_[i].name) {
      throw IoError("checkpoint: parameter '" + name + "' does not match expected '" +
                    net->params_[i].name + "'");
    }
    const uint32_t ndim = read_u32(is);
    Shape shape(ndim);
    for (uint32_t d = 0; d < ndim; ++d) shape[d] = read_i64(is);
    Tensor& t = net->params_[i].tensor;
    if (shape != t.shape()) {
      throw IoError("checkpoint: shape mismatch for '" + name + "': stored " +
                    shape_str(shape) + " vs expected " + shape_str(t.shape()));
    }
    auto dst = t.mutable_data();
    for (int64_t j = 0; j < t.numel(); ++j) dst[j] = static_cast<double>(read_f32(is));
  }
  const uint32_t n_buffers = read_u32(is);
  if (n_buffers != net->buffers_.size()) {
    throw IoError("checkpoint: buffer count mismatch");
  }
  for (uint32_t i = 0; i < n_buffers; ++i) {
    const std::string name = read_string(is);
    if (name != net->buffers_[i].name) {
      throw IoError("checkpoint: buffer '" + name + "' does not match expected '" +
                    net->buffers_[i].name + "'");
    }
    const uint32_t ndim = read_u32(is);
    if (ndim != 1) throw IoError("checkpoint: buffer '" + name + "' must be rank 1");
    const int64_t len = read_i64(is);
    std::vector<double>& dst = *net->buffers_[i].data;
    if (len != static_cast<int64_t>(dst.size())) {
      throw IoError("checkpoint: buffer length mismatch for '" + name + "'");
    }
    for (int64_t j = 0; j < len; ++j) dst[j] = static_cast<double>(read_f32(is));
  }
  return net;
}

}  // namespace snnsir
