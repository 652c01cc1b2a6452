#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "snnsir/errors.hpp"
#include "snnsir/rng.hpp"

namespace snnsir {

using Shape = std::vector<int64_t>;

int64_t numel_of(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Surrogate used for the backward pass of the spike step function.
/// `derivative` is the stand-in for dtheta/dx; `primitive` is its
/// antiderivative (a smooth step), which test oracles differentiate
/// numerically.
struct SurrogateSpec {
  enum class Kind { Arctan, Rectangular };

  Kind kind = Kind::Arctan;
  double alpha = 2.0;  // steepness (arctan) or window width (rectangular)

  double derivative(double x) const;
  double primitive(double x) const;
  void validate() const;
};

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  bool requires_grad = false;
  std::vector<double> grad;  // sized lazily during backward
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

}  // namespace detail

/// Dense double-precision tensor participating in a reverse-mode autodiff
/// graph. Handles share the underlying node; data is immutable after
/// construction except for leaf initialization and optimizer updates.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(const Shape& shape, bool requires_grad = false);
  static Tensor ones(const Shape& shape, bool requires_grad = false);
  static Tensor full(const Shape& shape, double value, bool requires_grad = false);
  static Tensor from_vector(const Shape& shape, std::vector<double> data,
                            bool requires_grad = false);
  static Tensor randn(const Shape& shape, Rng& rng, double stddev = 1.0,
                      bool requires_grad = false);
  static Tensor rand_uniform(const Shape& shape, Rng& rng, double lo, double hi,
                             bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  int ndim() const { return static_cast<int>(shape().size()); }
  int64_t dim(int axis) const;
  int64_t numel() const;
  bool requires_grad() const;
  void set_requires_grad(bool value);  // leaves only

  std::span<const double> data() const;
  std::span<double> mutable_data();  // leaf initialization / optimizer updates
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  double item() const;  // numel()==1
  double at(std::initializer_list<int64_t> index) const;

  /// Reverse-mode sweep from a scalar; accumulates into .grad of every
  /// requires_grad tensor reachable through the graph.
  void backward();

  /// Same data, cut out of the graph (stop-gradient).
  Tensor detach() const;

  std::shared_ptr<detail::Node> node() const { return node_; }
  static Tensor wrap(std::shared_ptr<detail::Node> node);

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Tensor whose payload is exactly {0,1}, with a cached ones-count.
struct SpikeTensor {
  Tensor values;
  int64_t ones = 0;

  int64_t numel() const { return values.numel(); }
  double firing_rate() const {
    return numel() ? static_cast<double>(ones) / static_cast<double>(numel()) : 0.0;
  }

  /// Validates binarity; throws ValueError otherwise.
  static SpikeTensor wrap(const Tensor& t);
};

/// RAII guard disabling graph construction (inference / profiling).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_mode_enabled();

// ---- elementwise ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double c);
Tensor mul_scalar(const Tensor& a, double c);
Tensor rsub_scalar(double c, const Tensor& a);  // c - a
Tensor abs(const Tensor& a);
Tensor sigmoid(const Tensor& a);

// Broadcast multiplies; the only broadcasts supported are per-channel
// scalars and per-pixel maps.
Tensor mul_channel(const Tensor& x, const Tensor& scale);  // [N,C,H,W] * [N,C]
Tensor mul_spatial(const Tensor& x, const Tensor& map);    // [N,C,H,W] * [N,1,H,W]

// ---- linear algebra ----
Tensor matmul(const Tensor& a, const Tensor& b);  // [m,k] x [k,n]
Tensor bmm(const Tensor& a, const Tensor& b, bool transpose_a = false,
           bool transpose_b = false);  // [B,*,*] batched
Tensor linear(const Tensor& x, const Tensor& weight);  // [n,in] x [out,in]^T

// ---- convolution ----
Tensor conv2d(const Tensor& input, const Tensor& weight, int stride = 1,
              int padding = 0, int groups = 1);
int64_t conv2d_out_dim(int64_t in, int64_t kernel, int stride, int padding);

// ---- shape ----
Tensor reshape(const Tensor& x, const Shape& shape);
Tensor permute(const Tensor& x, const std::vector<int>& axes);
Tensor concat(const std::vector<Tensor>& parts, int axis);  // axis 0 or 1
Tensor slice_axis0(const Tensor& x, int64_t begin, int64_t end);
Tensor slice_channels(const Tensor& x, int64_t begin, int64_t end);

enum class PadMode { Zero, Reflect };
Tensor pad2d(const Tensor& x, int top, int bottom, int left, int right,
             PadMode mode = PadMode::Zero);
Tensor crop2d(const Tensor& x, int64_t top, int64_t left, int64_t height,
              int64_t width);

// ---- reductions ----
Tensor mean_all(const Tensor& x);
Tensor sum_all(const Tensor& x);
Tensor mean_axis(const Tensor& x, int axis);  // removes the axis
Tensor max_axis(const Tensor& x, int axis);

// ---- resampling ----
Tensor nearest_upsample(const Tensor& x, int factor);
Tensor pixel_shuffle(const Tensor& x, int factor);  // [N,C*r*r,H,W] -> [N,C,rH,rW]
/// Keys bicubic (a=-0.5), clamped borders. Forward-only: inputs feeding it
/// must not require grad.
Tensor bicubic_resize(const Tensor& x, int64_t out_h, int64_t out_w);

// ---- temporal ----
Tensor temporal_replicate(const Tensor& x, int64_t time_steps);  // [N,...] -> [T*N,...]
Tensor temporal_mean(const Tensor& x, int64_t time_steps);       // [T*N,...] -> [N,...]

// ---- spikes ----
/// theta(x) with theta(0)=1; backward multiplies by the surrogate derivative.
/// NaN input is rejected.
SpikeTensor heaviside(const Tensor& x, const SurrogateSpec& surrogate);

}  // namespace snnsir
