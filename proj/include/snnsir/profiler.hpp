#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "snnsir/tensor.hpp"

namespace snnsir {

enum class CostKind { Spike, Float };
enum class OpKind { Conv, Linear, Matmul, Eltwise };

const char* cost_kind_name(CostKind k);
const char* op_kind_name(OpKind k);

/// One accumulating row of the ledger. Counts are batch totals; the report
/// divides by the sample count. `dense_macs_per_step` is the dense MAC cost
/// of one time step over the batch slice the layer saw last.
struct LayerRecord {
  std::string name;
  CostKind cost = CostKind::Spike;
  OpKind op = OpKind::Conv;
  double dense_macs_per_step = 0.0;
  int64_t spikes_in = 0;
  int64_t elements_in = 0;
  double sop_count = 0.0;   // accumulated ACs
  double flop_count = 0.0;  // accumulated MACs

  double firing_rate() const {
    return elements_in ? static_cast<double>(spikes_in) / static_cast<double>(elements_in) : 0.0;
  }
};

/// Per-pixel mean firing rate over the time axis (and channels/batch) at a
/// recording point. Values are in [0,1].
struct SfrMap {
  std::string block;
  std::string view;
  int64_t height = 0;
  int64_t width = 0;
  std::vector<double> values;
};

struct EnergyReport {
  double flops_g = 0.0;  // per sample
  double sops_g = 0.0;   // per sample
  double energy_mj = 0.0;
  int64_t sample_count = 0;
  std::vector<LayerRecord> layers;  // batch totals, network order
  std::vector<std::pair<std::string, double>> sfr_per_block;

  std::string to_text() const;
  std::string to_json() const;
};

/// E = 0.9 pJ x SOPs + 4.6 pJ x FLOPs, with counts given in units of 1e9
/// and the result in mJ.
double energy_mj(double sops_g, double flops_g);

// Dense MAC counting helpers (per frame).
double conv_dense_macs(int64_t cout, int64_t cin_per_group, int64_t kh, int64_t kw,
                       int64_t out_h, int64_t out_w);
double linear_dense_macs(int64_t in_dim, int64_t out_dim);
/// Row-wise attention: W*W*C for Q K^T plus W*C*W per applied value product.
double attention_dense_macs(int64_t rows, int64_t row_w, int64_t channels,
                            int64_t value_products);

/// Accumulates per-layer FLOP/SOP/spike counters for one or more forward
/// passes. Entries merge by name, so a weight-shared layer invoked per view
/// stays a single row.
class EnergyLedger {
 public:
  void record_spike_layer(const std::string& name, OpKind op,
                          double dense_macs_per_step, const SpikeTensor& input,
                          int64_t time_steps);
  void record_float_layer(const std::string& name, OpKind op, double macs);

  /// Spec-shaped entry point: `spike_input` must be present iff kind==Spike.
  void record_layer(const std::string& name, CostKind kind, OpKind op,
                    double dense_macs_per_step, const SpikeTensor* spike_input,
                    int64_t time_steps);

  void add_samples(int64_t n) { sample_count_ += n; }
  int64_t sample_count() const { return sample_count_; }

  const std::vector<LayerRecord>& entries() const { return entries_; }
  double total_sops() const;
  double total_flops() const;
  int64_t total_spikes() const;

  // SFR recording (off by default).
  void enable_sfr(bool keep_payloads = false);
  bool sfr_enabled() const { return sfr_enabled_; }
  void record_sfr(const std::string& block, const std::string& view,
                  const SpikeTensor& spikes, int64_t time_steps);
  std::vector<SfrMap> sfr_maps() const;
  /// Mean firing rate per recorded block (views pooled), in recording order.
  std::vector<std::pair<std::string, double>> sfr_curve() const;
  /// Payloads retained when enable_sfr(true) was requested; lets tests
  /// recount spikes independently of the counters.
  const std::vector<SpikeTensor>& retained_spikes() const { return retained_; }

  /// Associative, order-insensitive merge of ledgers from parallel workers.
  void merge(const EnergyLedger& other);

  EnergyReport report() const;
  void reset();

 private:
  LayerRecord& upsert(const std::string& name, CostKind cost, OpKind op);

  struct SfrAccum {
    std::string block, view;
    int64_t height = 0, width = 0;
    std::vector<double> sum;  // per-pixel spike sums
    int64_t frames = 0;       // T*N*C accumulated per pixel
  };

  std::vector<LayerRecord> entries_;
  std::map<std::string, size_t> index_;
  int64_t sample_count_ = 0;

  bool sfr_enabled_ = false;
  bool keep_payloads_ = false;
  std::vector<SfrAccum> sfr_;
  std::map<std::string, size_t> sfr_index_;
  std::vector<SpikeTensor> retained_;
};

}  // namespace snnsir
