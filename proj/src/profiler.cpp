#include "snnsir/profiler.hpp"

#include <cmath>
#include <sstream>

#include "json.hpp"

namespace snnsir {

const char* cost_kind_name(CostKind k) {
  return k == CostKind::Spike ? "spike" : "float";
}

const char* op_kind_name(OpKind k) {
  switch (k) {
    case OpKind::Conv: return "conv";
    case OpKind::Linear: return "linear";
    case OpKind::Matmul: return "matmul";
    case OpKind::Eltwise: return "eltwise";
  }
  return "?";
}

double energy_mj(double sops_g, double flops_g) {
  if (sops_g < 0.0 || flops_g < 0.0) throw ValueError("energy_mj: negative op count");
  // 0.9 pJ/AC and 4.6 pJ/MAC on 45nm hardware; 1e9 ops at 1 pJ is 1e-3 J.
  return 0.9 * sops_g + 4.6 * flops_g;
}

double conv_dense_macs(int64_t cout, int64_t cin_per_group, int64_t kh, int64_t kw,
                       int64_t out_h, int64_t out_w) {
  return static_cast<double>(cout) * static_cast<double>(cin_per_group) *
         static_cast<double>(kh * kw) * static_cast<double>(out_h * out_w);
}

double linear_dense_macs(int64_t in_dim, int64_t out_dim) {
  return static_cast<double>(in_dim) * static_cast<double>(out_dim);
}

double attention_dense_macs(int64_t rows, int64_t row_w, int64_t channels,
                            int64_t value_products) {
  const double per_row = static_cast<double>(row_w) * static_cast<double>(row_w) *
                         static_cast<double>(channels);
  return static_cast<double>(rows) * per_row * static_cast<double>(1 + value_products);
}

LayerRecord& EnergyLedger::upsert(const std::string& name, CostKind cost, OpKind op) {
  auto it = index_.find(name);
  if (it != index_.end()) {
    LayerRecord& r = entries_[it->second];
    if (r.cost != cost) {
      throw ValueError("ledger: layer '" + name + "' recorded with mixed cost kinds");
    }
    return r;
  }
  index_[name] = entries_.size();
  LayerRecord r;
  r.name = name;
  r.cost = cost;
  r.op = op;
  entries_.push_back(std::move(r));
  return entries_.back();
}

void EnergyLedger::record_spike_layer(const std::string& name, OpKind op,
                                      double dense_macs_per_step,
                                      const SpikeTensor& input, int64_t time_steps) {
  if (time_steps < 1) throw ValueError("ledger: time_steps must be >= 1");
  LayerRecord& r = upsert(name, CostKind::Spike, op);
  r.dense_macs_per_step = dense_macs_per_step;
  r.spikes_in += input.ones;
  r.elements_in += input.numel();
  r.sop_count += input.firing_rate() * static_cast<double>(time_steps) * dense_macs_per_step;
}

void EnergyLedger::record_float_layer(const std::string& name, OpKind op, double macs) {
  LayerRecord& r = upsert(name, CostKind::Float, op);
  r.flop_count += macs;
}

void EnergyLedger::record_layer(const std::string& name, CostKind kind, OpKind op,
                                double dense_macs_per_step,
                                const SpikeTensor* spike_input, int64_t time_steps) {
  if (kind == CostKind::Spike) {
    if (!spike_input) throw ValueError("record_layer: spike kind requires a spike input");
    record_spike_layer(name, op, dense_macs_per_step, *spike_input, time_steps);
  } else {
    if (spike_input) throw ValueError("record_layer: float kind takes no spike input");
    record_float_layer(name, op, dense_macs_per_step);
  }
}

double EnergyLedger::total_sops() const {
  double acc = 0.0;
  for (const auto& r : entries_) acc += r.sop_count;
  return acc;
}

double EnergyLedger::total_flops() const {
  double acc = 0.0;
  for (const auto& r : entries_) acc += r.flop_count;
  return acc;
}

int64_t EnergyLedger::total_spikes() const {
  int64_t acc = 0;
  for (const auto& r : entries_) acc += r.spikes_in;
  return acc;
}

void EnergyLedger::enable_sfr(bool keep_payloads) {
  sfr_enabled_ = true;
  keep_payloads_ = keep_payloads;
}

void EnergyLedger::record_sfr(const std::string& block, const std::string& view,
                              const SpikeTensor& spikes, int64_t time_steps) {
  if (!sfr_enabled_) return;
  const Tensor& v = spikes.values;
  if (v.ndim() != 4) throw ShapeError("record_sfr: expected [T*N,C,H,W] spikes");
  const int64_t rows = v.dim(0), c = v.dim(1), h = v.dim(2), w = v.dim(3);
  if (rows % time_steps != 0) throw ShapeError("record_sfr: rows not divisible by T");
  const std::string key = block + "|" + view;
  auto it = sfr_index_.find(key);
  if (it == sfr_index_.end()) {
    sfr_index_[key] = sfr_.size();
    SfrAccum a;
    a.block = block;
    a.view = view;
    a.height = h;
    a.width = w;
    a.sum.assign(static_cast<size_t>(h * w), 0.0);
    sfr_.push_back(std::move(a));
    it = sfr_index_.find(key);
  }
  SfrAccum& a = sfr_[it->second];
  if (a.height != h || a.width != w) {
    throw ShapeError("record_sfr: block '" + block + "' recorded at mixed resolutions");
  }
  const auto d = v.data();
  for (int64_t p = 0; p < rows * c; ++p) {
    const double* src = d.data() + p * h * w;
    for (int64_t i = 0; i < h * w; ++i) a.sum[i] += src[i];
  }
  a.frames += rows * c;
  if (keep_payloads_) retained_.push_back(spikes);
}

std::vector<SfrMap> EnergyLedger::sfr_maps() const {
  std::vector<SfrMap> out;
  for (const auto& a : sfr_) {
    SfrMap m;
    m.block = a.block;
    m.view = a.view;
    m.height = a.height;
    m.width = a.width;
    m.values.resize(a.sum.size());
    const double inv = a.frames ? 1.0 / static_cast<double>(a.frames) : 0.0;
    for (size_t i = 0; i < a.sum.size(); ++i) m.values[i] = a.sum[i] * inv;
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<std::pair<std::string, double>> EnergyLedger::sfr_curve() const {
  // Views pooled per block, preserving first-recorded order.
  std::vector<std::pair<std::string, double>> out;
  std::map<std::string, size_t> seen;
  std::vector<double> num, den;
  for (const auto& a : sfr_) {
    double s = 0.0;
    for (double v : a.sum) s += v;
    auto it = seen.find(a.block);
    if (it == seen.end()) {
      seen[a.block] = out.size();
      out.emplace_back(a.block, 0.0);
      num.push_back(s);
      den.push_back(static_cast<double>(a.frames) * a.sum.size());
    } else {
      num[it->second] += s;
      den[it->second] += static_cast<double>(a.frames) * a.sum.size();
    }
  }
  for (size_t i = 0; i < out.size(); ++i) {
    out[i].second = den[i] > 0.0 ? num[i] / den[i] : 0.0;
  }
  return out;
}

void EnergyLedger::merge(const EnergyLedger& other) {
  for (const auto& r : other.entries_) {
    LayerRecord& mine = upsert(r.name, r.cost, r.op);
    mine.dense_macs_per_step = r.dense_macs_per_step;
    mine.spikes_in += r.spikes_in;
    mine.elements_in += r.elements_in;
    mine.sop_count += r.sop_count;
    mine.flop_count += r.flop_count;
  }
  sample_count_ += other.sample_count_;
  for (const auto& a : other.sfr_) {
    const std::string key = a.block + "|" + a.view;
    auto it = sfr_index_.find(key);
    if (it == sfr_index_.end()) {
      sfr_index_[key] = sfr_.size();
      sfr_.push_back(a);
    } else {
      SfrAccum& mine = sfr_[it->second];
      if (mine.height != a.height || mine.width != a.width) {
        throw ShapeError("merge: SFR resolution mismatch for block '" + a.block + "'");
      }
      for (size_t i = 0; i < mine.sum.size(); ++i) mine.sum[i] += a.sum[i];
      mine.frames += a.frames;
    }
  }
  for (const auto& s : other.retained_) retained_.push_back(s);
}

EnergyReport EnergyLedger::report() const {
  EnergyReport rep;
  rep.sample_count = sample_count_;
  const double inv = sample_count_ ? 1.0 / static_cast<double>(sample_count_) : 0.0;
  rep.sops_g = total_sops() * inv / 1e9;
  rep.flops_g = total_flops() * inv / 1e9;
  rep.energy_mj = energy_mj(rep.sops_g, rep.flops_g);
  rep.layers = entries_;
  rep.sfr_per_block = sfr_curve();
  return rep;
}

void EnergyLedger::reset() {
  entries_.clear();
  index_.clear();
  sample_count_ = 0;
  sfr_.clear();
  sfr_index_.clear();
  retained_.clear();
}

std::string EnergyReport::to_text() const {
  std::ostringstream os;
  os << "energy report (" << sample_count << " sample" << (sample_count == 1 ? "" : "s")
     << ")\n";
  os << "  FLOPs: " << flops_g << " G/sample\n";
  os << "  SOPs:  " << sops_g << " G/sample\n";
  os << "  E:     " << energy_mj << " mJ/sample\n";
  os << "  layers:\n";
  const double inv = sample_count ? 1.0 / static_cast<double>(sample_count) : 0.0;
  for (const auto& r : layers) {
    os << "    " << r.name << " [" << cost_kind_name(r.cost) << "/" << op_kind_name(r.op)
       << "]";
    if (r.cost == CostKind::Spike) {
      os << " fr=" << r.firing_rate() << " sops_g=" << r.sop_count * inv / 1e9;
    } else {
      os << " flops_g=" << r.flop_count * inv / 1e9;
    }
    os << "\n";
  }
  if (!sfr_per_block.empty()) {
    os << "  sfr per block:\n";
    for (const auto& [name, fr] : sfr_per_block) {
      os << "    " << name << ": " << fr << "\n";
    }
  }
  return os.str();
}

std::string EnergyReport::to_json() const {
  nlohmann::json j;
  j["flops_g"] = flops_g;
  j["sops_g"] = sops_g;
  j["energy_mj"] = energy_mj;
  j["sample_count"] = sample_count;
  const double inv = sample_count ? 1.0 / static_cast<double>(sample_count) : 0.0;
  nlohmann::json layers_j = nlohmann::json::array();
  for (const auto& r : layers) {
    nlohmann::json lj;
    lj["name"] = r.name;
    lj["kind"] = cost_kind_name(r.cost);
    lj["op"] = op_kind_name(r.op);
    lj["firing_rate"] = r.firing_rate();
    lj["spikes_in"] = r.spikes_in;
    lj["elements_in"] = r.elements_in;
    lj["sops_g"] = r.sop_count * inv / 1e9;
    lj["flops_g"] = r.flop_count * inv / 1e9;
    layers_j.push_back(std::move(lj));
  }
  j["layers"] = std::move(layers_j);
  nlohmann::json sfr_j = nlohmann::json::array();
  for (const auto& [name, fr] : sfr_per_block) {
    sfr_j.push_back({{"block", name}, {"mean_firing_rate", fr}});
  }
  j["sfr_per_block"] = std::move(sfr_j);
  return j.dump(2);
}

}  // namespace snnsir
