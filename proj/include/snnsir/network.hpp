#pragma once

#include <memory>
#include <string>
#include <vector>

#include "snnsir/blocks.hpp"

namespace snnsir {

enum class Task { Raindrop, Rainstreak, Lowlight, Superres };

const char* task_name(Task t);
Task task_from_name(const std::string& name);

struct NetworkConfig {
  std::vector<int64_t> channels{32, 64, 96, 128, 160};
  int64_t time_steps = 4;
  double u_th = 0.2;  // 0.1 in low-light mode
  double u_rest = 0.0;
  double tau = 2.0;
  int refine_blocks = 4;
  int64_t refine_channels = 32;
  Task task = Task::Raindrop;
  int sr_scale = 2;
  int sr_trunk_blocks = 6;
  int ssc_expansion = 2;
  SurrogateSpec surrogate{};
  AblationFlags ablation{};

  void validate() const;
  LifParams lif_params() const { return LifParams{tau, u_th, u_rest}; }
  /// Defaults per task; low-light switches the threshold to 0.1.
  static NetworkConfig for_task(Task t);

  std::string to_json() const;
  static NetworkConfig from_json(const std::string& text);
};

struct RestorationOutput {
  StereoPair coarse;
  StereoPair refined;
};

/// Two-stage spike-driven stereo restoration network: a U-shaped
/// degradation-removal stage producing a coarse residual, followed by a
/// full-resolution SSRB refinement stage. The super-resolution variant swaps
/// in a single-resolution trunk with a pixel-shuffle tail over a bicubic base.
class SnnsirNetwork {
 public:
  SnnsirNetwork(const NetworkConfig& cfg, uint64_t seed);

  RestorationOutput forward(const StereoPair& input, RunContext& ctx);
  StereoPair forward_stage1(const StereoPair& input, RunContext& ctx);
  StereoPair forward_stage2(const StereoPair& coarse, RunContext& ctx);
  StereoPair forward_superres(const StereoPair& input, RunContext& ctx);

  const NetworkConfig& config() const { return cfg_; }
  std::vector<ParamEntry>& parameters() { return params_; }
  std::vector<BufferEntry>& buffers() { return buffers_; }
  int64_t parameter_count() const;

  void save_checkpoint(const std::string& path, int64_t step) const;
  static std::unique_ptr<SnnsirNetwork> load_checkpoint(const std::string& path,
                                                        int64_t* step = nullptr);

 private:
  void build(uint64_t seed);

  NetworkConfig cfg_;

  struct EncLevel {
    FebBlock feb;
    SscmModule sscm;
  };
  struct DecLevel {
    UpsampleBlock up;
    FebBlock feb;
    SscmModule sscm;
    SscaModule ssca;
  };
  struct SrBlock {
    FebBlock feb;
    SscmModule sscm;
    SscaModule ssca;
  };

  // stage 1
  FloatConvLayer head1_, tail1_;
  std::vector<EncLevel> enc_;  // per level, bottleneck last
  std::vector<DownsampleBlock> down_;
  SscaModule bottleneck_ssca_;
  std::vector<DecLevel> dec_;  // deepest first
  // stage 2
  FloatConvLayer head2_, tail2_;
  std::vector<SsrbBlock> refine_;
  // super-resolution
  FloatConvLayer sr_head_, sr_tail_;
  std::vector<SrBlock> sr_trunk_;

  std::vector<ParamEntry> params_;
  std::vector<BufferEntry> buffers_;
};

}  // namespace snnsir
