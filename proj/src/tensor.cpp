#include "snnsir/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <unordered_set>

namespace snnsir {

namespace {

thread_local bool g_grad_enabled = true;

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

NodePtr make_node(Shape shape, std::vector<double> data) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  return n;
}

// Wires the output into the graph when grad mode is on and any parent
// needs gradients; otherwise the output stays a detached leaf.
void attach(const NodePtr& out, std::vector<NodePtr> parents,
            std::function<void(Node&)> backward_fn) {
  if (!g_grad_enabled) return;
  bool needed = false;
  for (const auto& p : parents) needed = needed || p->requires_grad;
  if (!needed) return;
  out->requires_grad = true;
  out->parents = std::move(parents);
  out->backward_fn = std::move(backward_fn);
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
  }
}

void check_defined(const Tensor& t, const char* op) {
  if (!t.defined()) throw ValueError(std::string(op) + ": undefined tensor");
}

int64_t checked_dim(const Tensor& t, int axis, const char* op) {
  if (axis < 0 || axis >= t.ndim()) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) +
                     " out of range for shape " + shape_str(t.shape()));
  }
  return t.shape()[axis];
}

}  // namespace

int64_t numel_of(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

// ---------------------------------------------------------------------------
// SurrogateSpec
// ---------------------------------------------------------------------------

void SurrogateSpec::validate() const {
  if (!(alpha > 0.0)) throw ConfigError("surrogate: alpha must be positive");
}

double SurrogateSpec::derivative(double x) const {
  constexpr double kPi = 3.141592653589793;
  switch (kind) {
    case Kind::Arctan: {
      const double u = kPi * alpha * x / 2.0;
      return alpha / (2.0 * (1.0 + u * u));
    }
    case Kind::Rectangular:
      return std::fabs(x) < alpha / 2.0 ? 1.0 / alpha : 0.0;
  }
  return 0.0;
}

double SurrogateSpec::primitive(double x) const {
  constexpr double kPi = 3.141592653589793;
  switch (kind) {
    case Kind::Arctan:
      return std::atan(kPi * alpha * x / 2.0) / kPi + 0.5;
    case Kind::Rectangular: {
      const double t = (x + alpha / 2.0) / alpha;
      return std::clamp(t, 0.0, 1.0);
    }
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Tensor
// ---------------------------------------------------------------------------

Tensor Tensor::wrap(std::shared_ptr<detail::Node> node) {
  Tensor t;
  t.node_ = std::move(node);
  return t;
}

Tensor Tensor::zeros(const Shape& shape, bool requires_grad) {
  return full(shape, 0.0, requires_grad);
}

Tensor Tensor::ones(const Shape& shape, bool requires_grad) {
  return full(shape, 1.0, requires_grad);
}

Tensor Tensor::full(const Shape& shape, double value, bool requires_grad) {
  auto n = make_node(shape, std::vector<double>(numel_of(shape), value));
  n->requires_grad = requires_grad;
  return wrap(std::move(n));
}

Tensor Tensor::from_vector(const Shape& shape, std::vector<double> data,
                           bool requires_grad) {
  if (static_cast<int64_t>(data.size()) != numel_of(shape)) {
    throw ShapeError("from_vector: data length " + std::to_string(data.size()) +
                     " does not match shape " + shape_str(shape));
  }
  auto n = make_node(shape, std::move(data));
  n->requires_grad = requires_grad;
  return wrap(std::move(n));
}

Tensor Tensor::randn(const Shape& shape, Rng& rng, double stddev, bool requires_grad) {
  std::vector<double> data(numel_of(shape));
  for (double& v : data) v = rng.normal() * stddev;
  return from_vector(shape, std::move(data), requires_grad);
}

Tensor Tensor::rand_uniform(const Shape& shape, Rng& rng, double lo, double hi,
                            bool requires_grad) {
  std::vector<double> data(numel_of(shape));
  for (double& v : data) v = rng.uniform(lo, hi);
  return from_vector(shape, std::move(data), requires_grad);
}

const Shape& Tensor::shape() const {
  if (!node_) throw ValueError("shape(): undefined tensor");
  return node_->shape;
}

int64_t Tensor::dim(int axis) const { return checked_dim(*this, axis, "dim"); }

int64_t Tensor::numel() const { return node_ ? node_->numel() : 0; }

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool value) {
  check_defined(*this, "set_requires_grad");
  if (node_->backward_fn) {
    throw ValueError("set_requires_grad: only leaf tensors can be toggled");
  }
  node_->requires_grad = value;
}

std::span<const double> Tensor::data() const {
  check_defined(*this, "data");
  return {node_->data.data(), node_->data.size()};
}

std::span<double> Tensor::mutable_data() {
  check_defined(*this, "mutable_data");
  return {node_->data.data(), node_->data.size()};
}

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::span<const double> Tensor::grad() const {
  check_defined(*this, "grad");
  return {node_->grad.data(), node_->grad.size()};
}

std::span<double> Tensor::mutable_grad() {
  check_defined(*this, "mutable_grad");
  node_->ensure_grad();
  return {node_->grad.data(), node_->grad.size()};
}

void Tensor::zero_grad() {
  check_defined(*this, "zero_grad");
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

double Tensor::item() const {
  check_defined(*this, "item");
  if (numel() != 1) throw ShapeError("item(): tensor has " + std::to_string(numel()) + " elements");
  return node_->data[0];
}

double Tensor::at(std::initializer_list<int64_t> index) const {
  check_defined(*this, "at");
  const Shape& s = shape();
  if (index.size() != s.size()) throw ShapeError("at(): rank mismatch");
  int64_t flat = 0;
  size_t axis = 0;
  for (int64_t i : index) {
    if (i < 0 || i >= s[axis]) throw ShapeError("at(): index out of range on axis " + std::to_string(axis));
    flat = flat * s[axis] + i;
    ++axis;
  }
  return node_->data[static_cast<size_t>(flat)];
}

Tensor Tensor::detach() const {
  check_defined(*this, "detach");
  return wrap(make_node(node_->shape, node_->data));
}

void Tensor::backward() {
  check_defined(*this, "backward");
  if (numel() != 1) {
    throw ValueError("backward(): root must be scalar, got shape " + shape_str(shape()));
  }
  // Iterative post-order DFS; `order` lists parents before children, so the
  // reverse sweep visits each node after all of its consumers.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  if (node_->backward_fn) {
    visited.insert(node_.get());
    stack.emplace_back(node_.get(), 0);
  }
  while (!stack.empty()) {
    auto& [n, idx] = stack.back();
    if (idx < n->parents.size()) {
      Node* p = n->parents[idx++].get();
      if (p->backward_fn && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  node_->ensure_grad();
  node_->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (!n->grad.empty()) n->backward_fn(*n);
  }
}

SpikeTensor SpikeTensor::wrap(const Tensor& t) {
  int64_t ones = 0;
  for (double v : t.data()) {
    if (v == 1.0) {
      ++ones;
    } else if (v != 0.0) {
      throw ValueError("SpikeTensor: payload contains non-binary value");
    }
  }
  return SpikeTensor{t, ones};
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_mode_enabled() { return g_grad_enabled; }

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  const auto& av = a.node()->data;
  const auto& bv = b.node()->data;
  std::vector<double> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
  auto n = make_node(a.shape(), std::move(out));
  attach(n, {a.node(), b.node()}, [](Node& self) {
    for (int pi = 0; pi < 2; ++pi) {
      Node& p = *self.parents[pi];
      if (!p.requires_grad) continue;
      p.ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
    }
  });
  return Tensor::wrap(n);
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  const auto& av = a.node()->data;
  const auto& bv = b.node()->data;
  std::vector<double> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] - bv[i];
  auto n = make_node(a.shape(), std::move(out));
  attach(n, {a.node(), b.node()}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      pa.ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) pb.grad[i] -= self.grad[i];
    }
  });
  return Tensor::wrap(n);
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  const auto& av = a.node()->data;
  const auto& bv = b.node()->data;
  std::vector<double> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i];
  auto n = make_node(a.shape(), std::move(out));
  attach(n, {a.node(), b.node()}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      pa.ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i] * pb.data[i];
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) pb.grad[i] += self.grad[i] * pa.data[i];
    }
  });
  return Tensor::wrap(n);
}

Tensor add_scalar(const Tensor& a, double c) {
  const auto& av = a.node()->data;
  std::vector<double> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] + c;
  auto n = make_node(a.shape(), std::move(out));
  attach(n, {a.node()}, [](Node& self) {
    Node& p = *self.parents[0];
    p.ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
  });
  return Tensor::wrap(n);
}

Tensor mul_scalar(const Tensor& a, double c) {
  const auto& av = a.node()->data;
  std::vector<double> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] * c;
  auto n = make_node(a.shape(), std::move(out));
  attach(n, {a.node()}, [c](Node& self) {
    Node& p = *self.parents[0];
    p.ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i] * c;
  });
  return Tensor::wrap(n);
}

Tensor rsub_scalar(double c, const Tensor& a) {
  const auto& av = a.node()->data;
  std::vector<double> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) out[i] = c - av[i];
  auto n = make_node(a.shape(), std::move(out));
  attach(n, {a.node()}, [](Node& self) {
    Node& p = *self.parents[0];
    p.ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) p.grad[i] -= self.grad[i];
  });
  return Tensor::wrap(n);
}

Tensor abs(const Tensor& a) {
  const auto& av = a.node()->data;
  std::vector<double> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) out[i] = std::fabs(av[i]);
  auto n = make_node(a.shape(), std::move(out));
  attach(n, {a.node()}, [](Node& self) {
    Node& p = *self.parents[0];
    p.ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) {
      const double x = p.data[i];
      p.grad[i] += self.grad[i] * (x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0));
    }
  });
  return Tensor::wrap(n);
}

Tensor sigmoid(const Tensor& a) {
  const auto& av = a.node()->data;
  std::vector<double> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-av[i]));
  auto n = make_node(a.shape(), std::move(out));
  attach(n, {a.node()}, [](Node& self) {
    Node& p = *self.parents[0];
    p.ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) {
      const double y = self.data[i];
      p.grad[i] += self.grad[i] * y * (1.0 - y);
    }
  });
  return Tensor::wrap(n);
}

Tensor mul_channel(const Tensor& x, const Tensor& scale) {
  if (x.ndim() != 4 || scale.ndim() != 2) {
    throw ShapeError("mul_channel: expected [N,C,H,W] and [N,C], got " +
                     shape_str(x.shape()) + " and " + shape_str(scale.shape()));
  }
  const int64_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  if (scale.dim(0) != n || scale.dim(1) != c) {
    throw ShapeError("mul_channel: scale shape " + shape_str(scale.shape()) +
                     " does not match input channels " + shape_str(x.shape()));
  }
  const auto& xv = x.node()->data;
  const auto& sv = scale.node()->data;
  std::vector<double> out(xv.size());
  for (int64_t i = 0; i < n * c; ++i) {
    const double s = sv[i];
    const double* xp = xv.data() + i * hw;
    double* op = out.data() + i * hw;
    for (int64_t j = 0; j < hw; ++j) op[j] = xp[j] * s;
  }
  auto node = make_node(x.shape(), std::move(out));
  attach(node, {x.node(), scale.node()}, [n, c, hw](Node& self) {
    Node& px = *self.parents[0];
    Node& ps = *self.parents[1];
    if (px.requires_grad) {
      px.ensure_grad();
      for (int64_t i = 0; i < n * c; ++i) {
        const double s = ps.data[i];
        const double* gp = self.grad.data() + i * hw;
        double* dp = px.grad.data() + i * hw;
        for (int64_t j = 0; j < hw; ++j) dp[j] += gp[j] * s;
      }
    }
    if (ps.requires_grad) {
      ps.ensure_grad();
      for (int64_t i = 0; i < n * c; ++i) {
        const double* gp = self.grad.data() + i * hw;
        const double* xp = px.data.data() + i * hw;
        double acc = 0.0;
        for (int64_t j = 0; j < hw; ++j) acc += gp[j] * xp[j];
        ps.grad[i] += acc;
      }
    }
  });
  return Tensor::wrap(node);
}

Tensor mul_spatial(const Tensor& x, const Tensor& map) {
  if (x.ndim() != 4 || map.ndim() != 4 || map.dim(1) != 1) {
    throw ShapeError("mul_spatial: expected [N,C,H,W] and [N,1,H,W], got " +
                     shape_str(x.shape()) + " and " + shape_str(map.shape()));
  }
  const int64_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  if (map.dim(0) != n || map.dim(2) != x.dim(2) || map.dim(3) != x.dim(3)) {
    throw ShapeError("mul_spatial: map shape " + shape_str(map.shape()) +
                     " does not match input " + shape_str(x.shape()));
  }
  const auto& xv = x.node()->data;
  const auto& mv = map.node()->data;
  std::vector<double> out(xv.size());
  for (int64_t b = 0; b < n; ++b) {
    const double* mp = mv.data() + b * hw;
    for (int64_t ch = 0; ch < c; ++ch) {
      const double* xp = xv.data() + (b * c + ch) * hw;
      double* op = out.data() + (b * c + ch) * hw;
      for (int64_t j = 0; j < hw; ++j) op[j] = xp[j] * mp[j];
    }
  }
  auto node = make_node(x.shape(), std::move(out));
  attach(node, {x.node(), map.node()}, [n, c, hw](Node& self) {
    Node& px = *self.parents[0];
    Node& pm = *self.parents[1];
    if (px.requires_grad) {
      px.ensure_grad();
      for (int64_t b = 0; b < n; ++b) {
        const double* mp = pm.data.data() + b * hw;
        for (int64_t ch = 0; ch < c; ++ch) {
          const double* gp = self.grad.data() + (b * c + ch) * hw;
          double* dp = px.grad.data() + (b * c + ch) * hw;
          for (int64_t j = 0; j < hw; ++j) dp[j] += gp[j] * mp[j];
        }
      }
    }
    if (pm.requires_grad) {
      pm.ensure_grad();
      for (int64_t b = 0; b < n; ++b) {
        double* dp = pm.grad.data() + b * hw;
        for (int64_t ch = 0; ch < c; ++ch) {
          const double* gp = self.grad.data() + (b * c + ch) * hw;
          const double* xp = px.data.data() + (b * c + ch) * hw;
          for (int64_t j = 0; j < hw; ++j) dp[j] += gp[j] * xp[j];
        }
      }
    }
  });
  return Tensor::wrap(node);
}

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

namespace {

// C (m x n, row major) += opA * opB with opA = m x k, opB = k x n.
// A is stored (ta ? k x m : m x k), likewise B. Accumulation over k is
// serial and in increasing order for every output element.
void mm_acc(double* c, const double* a, bool ta, const double* b, bool tb,
            int64_t m, int64_t n, int64_t k) {
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int64_t kk = 0; kk < k; ++kk) {
        const double av = ta ? a[kk * m + i] : a[i * k + kk];
        const double bv = tb ? b[j * k + kk] : b[kk * n + j];
        acc += av * bv;
      }
      c[i * n + j] += acc;
    }
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2) {
    throw ShapeError("matmul: expected rank-2 operands, got " + shape_str(a.shape()) +
                     " and " + shape_str(b.shape()));
  }
  const int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeError("matmul: inner axis mismatch, " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  }
  std::vector<double> out(static_cast<size_t>(m * n), 0.0);
  mm_acc(out.data(), a.node()->data.data(), false, b.node()->data.data(), false, m, n, k);
  auto node = make_node({m, n}, std::move(out));
  attach(node, {a.node(), b.node()}, [m, n, k](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      pa.ensure_grad();
      // dA = dC * B^T
      mm_acc(pa.grad.data(), self.grad.data(), false, pb.data.data(), true, m, k, n);
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      // dB = A^T * dC
      mm_acc(pb.grad.data(), pa.data.data(), true, self.grad.data(), false, k, n, m);
    }
  });
  return Tensor::wrap(node);
}

Tensor bmm(const Tensor& a, const Tensor& b, bool transpose_a, bool transpose_b) {
  if (a.ndim() != 3 || b.ndim() != 3 || a.dim(0) != b.dim(0)) {
    throw ShapeError("bmm: expected [B,*,*] operands with equal batch, got " +
                     shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  const int64_t batch = a.dim(0);
  const int64_t m = transpose_a ? a.dim(2) : a.dim(1);
  const int64_t k = transpose_a ? a.dim(1) : a.dim(2);
  const int64_t kb = transpose_b ? b.dim(2) : b.dim(1);
  const int64_t n = transpose_b ? b.dim(1) : b.dim(2);
  if (kb != k) {
    throw ShapeError("bmm: inner axis mismatch, " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  }
  std::vector<double> out(static_cast<size_t>(batch * m * n), 0.0);
  const double* ap = a.node()->data.data();
  const double* bp = b.node()->data.data();
  const int64_t a_sz = a.dim(1) * a.dim(2), b_sz = b.dim(1) * b.dim(2);
  for (int64_t i = 0; i < batch; ++i) {
    mm_acc(out.data() + i * m * n, ap + i * a_sz, transpose_a, bp + i * b_sz,
           transpose_b, m, n, k);
  }
  auto node = make_node({batch, m, n}, std::move(out));
  attach(node, {a.node(), b.node()},
         [batch, m, n, k, a_sz, b_sz, transpose_a, transpose_b](Node& self) {
           Node& pa = *self.parents[0];
           Node& pb = *self.parents[1];
           for (int64_t i = 0; i < batch; ++i) {
             const double* g = self.grad.data() + i * m * n;
             if (pa.requires_grad) {
               pa.ensure_grad();
               double* da = pa.grad.data() + i * a_sz;
               const double* bv = pb.data.data() + i * b_sz;
               if (!transpose_a) {
                 // dAop = dC * Bop^T, stored directly
                 mm_acc(da, g, false, bv, !transpose_b, m, k, n);
               } else {
                 // stored A is Aop^T: dA_stored = Bop * dC^T
                 mm_acc(da, bv, transpose_b, g, true, k, m, n);
               }
             }
             if (pb.requires_grad) {
               pb.ensure_grad();
               double* db = pb.grad.data() + i * b_sz;
               const double* av = pa.data.data() + i * a_sz;
               if (!transpose_b) {
                 // dBop = Aop^T * dC
                 mm_acc(db, av, !transpose_a, g, false, k, n, m);
               } else {
                 // stored B is Bop^T: dB_stored = dC^T * Aop
                 mm_acc(db, g, true, av, transpose_a, n, k, m);
               }
             }
           }
         });
  return Tensor::wrap(node);
}

Tensor linear(const Tensor& x, const Tensor& weight) {
  if (x.ndim() != 2 || weight.ndim() != 2 || x.dim(1) != weight.dim(1)) {
    throw ShapeError("linear: expected [n,in] x [out,in], got " + shape_str(x.shape()) +
                     " and " + shape_str(weight.shape()));
  }
  const int64_t n = x.dim(0), in = x.dim(1), out_dim = weight.dim(0);
  std::vector<double> out(static_cast<size_t>(n * out_dim), 0.0);
  mm_acc(out.data(), x.node()->data.data(), false, weight.node()->data.data(), true,
         n, out_dim, in);
  auto node = make_node({n, out_dim}, std::move(out));
  attach(node, {x.node(), weight.node()}, [n, in, out_dim](Node& self) {
    Node& px = *self.parents[0];
    Node& pw = *self.parents[1];
    if (px.requires_grad) {
      px.ensure_grad();
      mm_acc(px.grad.data(), self.grad.data(), false, pw.data.data(), false, n, in, out_dim);
    }
    if (pw.requires_grad) {
      pw.ensure_grad();
      mm_acc(pw.grad.data(), self.grad.data(), true, px.data.data(), false, out_dim, in, n);
    }
  });
  return Tensor::wrap(node);
}

// ---------------------------------------------------------------------------
// Convolution
// ---------------------------------------------------------------------------

int64_t conv2d_out_dim(int64_t in, int64_t kernel, int stride, int padding) {
  return (in + 2 * padding - kernel) / stride + 1;
}

namespace {

struct ConvDims {
  int64_t n, cin, h, w;
  int64_t cout, cin_g, kh, kw;
  int64_t ho, wo;
  int stride, padding, groups;
};

// out[n,co] += sum_{cig,kh,kw} w * in[n, ci]; the (cig,kh,kw) accumulation
// order per output element matches a naive per-element loop.
void conv_forward(const ConvDims& d, const double* x, const double* w, double* out) {
  const int64_t cout_g = d.cout / d.groups;
  for (int64_t n = 0; n < d.n; ++n) {
    for (int64_t co = 0; co < d.cout; ++co) {
      double* op = out + (n * d.cout + co) * d.ho * d.wo;
      const int64_t g = co / cout_g;
      for (int64_t cig = 0; cig < d.cin_g; ++cig) {
        const int64_t ci = g * d.cin_g + cig;
        const double* xp = x + (n * d.cin + ci) * d.h * d.w;
        for (int64_t fh = 0; fh < d.kh; ++fh) {
          for (int64_t fw = 0; fw < d.kw; ++fw) {
            const double wv = w[((co * d.cin_g + cig) * d.kh + fh) * d.kw + fw];
            if (wv == 0.0) continue;
            for (int64_t oh = 0; oh < d.ho; ++oh) {
              const int64_t ih = oh * d.stride - d.padding + fh;
              if (ih < 0 || ih >= d.h) continue;
              const double* xrow = xp + ih * d.w;
              double* orow = op + oh * d.wo;
              for (int64_t ow = 0; ow < d.wo; ++ow) {
                const int64_t iw = ow * d.stride - d.padding + fw;
                if (iw < 0 || iw >= d.w) continue;
                orow[ow] += wv * xrow[iw];
              }
            }
          }
        }
      }
    }
  }
}

void conv_backward_input(const ConvDims& d, const double* gout, const double* w,
                         double* gin) {
  const int64_t cout_g = d.cout / d.groups;
  for (int64_t n = 0; n < d.n; ++n) {
    for (int64_t co = 0; co < d.cout; ++co) {
      const double* gp = gout + (n * d.cout + co) * d.ho * d.wo;
      const int64_t g = co / cout_g;
      for (int64_t cig = 0; cig < d.cin_g; ++cig) {
        const int64_t ci = g * d.cin_g + cig;
        double* dxp = gin + (n * d.cin + ci) * d.h * d.w;
        for (int64_t fh = 0; fh < d.kh; ++fh) {
          for (int64_t fw = 0; fw < d.kw; ++fw) {
            const double wv = w[((co * d.cin_g + cig) * d.kh + fh) * d.kw + fw];
            if (wv == 0.0) continue;
            for (int64_t oh = 0; oh < d.ho; ++oh) {
              const int64_t ih = oh * d.stride - d.padding + fh;
              if (ih < 0 || ih >= d.h) continue;
              const double* grow = gp + oh * d.wo;
              double* dxrow = dxp + ih * d.w;
              for (int64_t ow = 0; ow < d.wo; ++ow) {
                const int64_t iw = ow * d.stride - d.padding + fw;
                if (iw < 0 || iw >= d.w) continue;
                dxrow[iw] += wv * grow[ow];
              }
            }
          }
        }
      }
    }
  }
}

void conv_backward_weight(const ConvDims& d, const double* gout, const double* x,
                          double* gw) {
  const int64_t cout_g = d.cout / d.groups;
  for (int64_t n = 0; n < d.n; ++n) {
    for (int64_t co = 0; co < d.cout; ++co) {
      const double* gp = gout + (n * d.cout + co) * d.ho * d.wo;
      const int64_t g = co / cout_g;
      for (int64_t cig = 0; cig < d.cin_g; ++cig) {
        const int64_t ci = g * d.cin_g + cig;
        const double* xp = x + (n * d.cin + ci) * d.h * d.w;
        for (int64_t fh = 0; fh < d.kh; ++fh) {
          for (int64_t fw = 0; fw < d.kw; ++fw) {
            double acc = 0.0;
            for (int64_t oh = 0; oh < d.ho; ++oh) {
              const int64_t ih = oh * d.stride - d.padding + fh;
              if (ih < 0 || ih >= d.h) continue;
              const double* grow = gp + oh * d.wo;
              const double* xrow = xp + ih * d.w;
              for (int64_t ow = 0; ow < d.wo; ++ow) {
                const int64_t iw = ow * d.stride - d.padding + fw;
                if (iw < 0 || iw >= d.w) continue;
                acc += grow[ow] * xrow[iw];
              }
            }
            gw[((co * d.cin_g + cig) * d.kh + fh) * d.kw + fw] += acc;
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, int stride, int padding,
              int groups) {
  if (input.ndim() != 4) {
    throw ShapeError("conv2d: input must be [N,C,H,W], got " + shape_str(input.shape()));
  }
  if (weight.ndim() != 4) {
    throw ShapeError("conv2d: weight must be [Cout,Cin/g,kh,kw], got " +
                     shape_str(weight.shape()));
  }
  if (stride < 1) throw ValueError("conv2d: stride must be >= 1");
  if (padding < 0) throw ValueError("conv2d: padding must be >= 0");
  ConvDims d;
  d.n = input.dim(0);
  d.cin = input.dim(1);
  d.h = input.dim(2);
  d.w = input.dim(3);
  d.cout = weight.dim(0);
  d.cin_g = weight.dim(1);
  d.kh = weight.dim(2);
  d.kw = weight.dim(3);
  d.stride = stride;
  d.padding = padding;
  d.groups = groups;
  if (groups < 1 || d.cin % groups != 0 || d.cout % groups != 0) {
    throw ShapeError("conv2d: groups " + std::to_string(groups) +
                     " must divide input channels " + std::to_string(d.cin) +
                     " and output channels " + std::to_string(d.cout));
  }
  if (d.cin / groups != d.cin_g) {
    throw ShapeError("conv2d: weight channel axis is " + std::to_string(d.cin_g) +
                     " but input has " + std::to_string(d.cin / groups) +
                     " channels per group");
  }
  if (d.h + 2 * padding < d.kh || d.w + 2 * padding < d.kw) {
    throw ShapeError("conv2d: spatial axes " + std::to_string(d.h) + "x" +
                     std::to_string(d.w) + " plus padding are smaller than kernel " +
                     std::to_string(d.kh) + "x" + std::to_string(d.kw));
  }
  d.ho = conv2d_out_dim(d.h, d.kh, stride, padding);
  d.wo = conv2d_out_dim(d.w, d.kw, stride, padding);

  std::vector<double> out(static_cast<size_t>(d.n * d.cout * d.ho * d.wo), 0.0);
  conv_forward(d, input.node()->data.data(), weight.node()->data.data(), out.data());
  auto node = make_node({d.n, d.cout, d.ho, d.wo}, std::move(out));
  attach(node, {input.node(), weight.node()}, [d](Node& self) {
    Node& px = *self.parents[0];
    Node& pw = *self.parents[1];
    if (px.requires_grad) {
      px.ensure_grad();
      conv_backward_input(d, self.grad.data(), pw.data.data(), px.grad.data());
    }
    if (pw.requires_grad) {
      pw.ensure_grad();
      conv_backward_weight(d, self.grad.data(), px.data.data(), pw.grad.data());
    }
  });
  return Tensor::wrap(node);
}

// ---------------------------------------------------------------------------
// Shape ops
// ---------------------------------------------------------------------------

Tensor reshape(const Tensor& x, const Shape& shape) {
  if (numel_of(shape) != x.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                     shape_str(shape));
  }
  auto node = make_node(shape, x.node()->data);
  attach(node, {x.node()}, [](Node& self) {
    Node& p = *self.parents[0];
    p.ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
  });
  return Tensor::wrap(node);
}

Tensor permute(const Tensor& x, const std::vector<int>& axes) {
  const int rank = x.ndim();
  if (static_cast<int>(axes.size()) != rank) {
    throw ShapeError("permute: axes rank mismatch for " + shape_str(x.shape()));
  }
  std::vector<bool> seen(rank, false);
  Shape out_shape(rank);
  for (int i = 0; i < rank; ++i) {
    const int a = axes[i];
    if (a < 0 || a >= rank || seen[a]) throw ShapeError("permute: invalid axis list");
    seen[a] = true;
    out_shape[i] = x.shape()[a];
  }
  std::vector<int64_t> in_strides(rank, 1), out_strides(rank, 1);
  for (int i = rank - 2; i >= 0; --i) {
    in_strides[i] = in_strides[i + 1] * x.shape()[i + 1];
    out_strides[i] = out_strides[i + 1] * out_shape[i + 1];
  }
  const int64_t total = x.numel();
  const auto& xv = x.node()->data;
  std::vector<double> out(static_cast<size_t>(total));
  std::vector<int64_t> gather(rank);
  for (int i = 0; i < rank; ++i) gather[i] = in_strides[axes[i]];
  for (int64_t flat = 0; flat < total; ++flat) {
    int64_t rem = flat, src = 0;
    for (int i = 0; i < rank; ++i) {
      const int64_t idx = rem / out_strides[i];
      rem -= idx * out_strides[i];
      src += idx * gather[i];
    }
    out[flat] = xv[src];
  }
  auto node = make_node(out_shape, std::move(out));
  attach(node, {x.node()}, [out_strides, gather, rank, total](Node& self) {
    Node& p = *self.parents[0];
    p.ensure_grad();
    for (int64_t flat = 0; flat < total; ++flat) {
      int64_t rem = flat, src = 0;
      for (int i = 0; i < rank; ++i) {
        const int64_t idx = rem / out_strides[i];
        rem -= idx * out_strides[i];
        src += idx * gather[i];
      }
      p.grad[src] += self.grad[flat];
    }
  });
  return Tensor::wrap(node);
}

namespace {

struct AxisSplit {
  int64_t outer = 1, len = 1, inner = 1;
};

AxisSplit split_at(const Shape& shape, int axis) {
  AxisSplit s;
  for (int i = 0; i < axis; ++i) s.outer *= shape[i];
  s.len = shape[axis];
  for (size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw ValueError("concat: no inputs");
  if (axis != 0 && axis != 1) throw ShapeError("concat: only axes 0 and 1 supported");
  const Shape& first = parts[0].shape();
  Shape out_shape = first;
  int64_t axis_total = 0;
  for (const Tensor& t : parts) {
    const Shape& s = t.shape();
    if (s.size() != first.size()) throw ShapeError("concat: rank mismatch");
    for (size_t i = 0; i < s.size(); ++i) {
      if (static_cast<int>(i) != axis && s[i] != first[i]) {
        throw ShapeError("concat: shape mismatch on axis " + std::to_string(i) + ": " +
                         shape_str(s) + " vs " + shape_str(first));
      }
    }
    axis_total += s[axis];
  }
  out_shape[axis] = axis_total;
  const AxisSplit sp = split_at(out_shape, axis);
  std::vector<double> out(static_cast<size_t>(numel_of(out_shape)));
  std::vector<int64_t> offsets;  // per-part offset along the axis
  int64_t off = 0;
  for (const Tensor& t : parts) {
    offsets.push_back(off);
    const int64_t len = t.shape()[axis];
    const auto& tv = t.node()->data;
    for (int64_t o = 0; o < sp.outer; ++o) {
      std::memcpy(out.data() + (o * sp.len + off) * sp.inner,
                  tv.data() + o * len * sp.inner,
                  static_cast<size_t>(len * sp.inner) * sizeof(double));
    }
    off += len;
  }
  auto node = make_node(out_shape, std::move(out));
  std::vector<NodePtr> parent_nodes;
  for (const Tensor& t : parts) parent_nodes.push_back(t.node());
  std::vector<int64_t> lens;
  for (const Tensor& t : parts) lens.push_back(t.shape()[axis]);
  attach(node, parent_nodes, [sp, offsets, lens](Node& self) {
    for (size_t pi = 0; pi < self.parents.size(); ++pi) {
      Node& p = *self.parents[pi];
      if (!p.requires_grad) continue;
      p.ensure_grad();
      const int64_t len = lens[pi], off = offsets[pi];
      for (int64_t o = 0; o < sp.outer; ++o) {
        const double* g = self.grad.data() + (o * sp.len + off) * sp.inner;
        double* d = p.grad.data() + o * len * sp.inner;
        for (int64_t i = 0; i < len * sp.inner; ++i) d[i] += g[i];
      }
    }
  });
  return Tensor::wrap(node);
}

namespace {

Tensor slice_axis(const Tensor& x, int axis, int64_t begin, int64_t end) {
  const int64_t len = checked_dim(x, axis, "slice");
  if (begin < 0 || end > len || begin >= end) {
    throw ShapeError("slice: range [" + std::to_string(begin) + "," +
                     std::to_string(end) + ") invalid for axis length " +
                     std::to_string(len));
  }
  const AxisSplit sp = split_at(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape[axis] = end - begin;
  const int64_t out_len = end - begin;
  std::vector<double> out(static_cast<size_t>(numel_of(out_shape)));
  const auto& xv = x.node()->data;
  for (int64_t o = 0; o < sp.outer; ++o) {
    std::memcpy(out.data() + o * out_len * sp.inner,
                xv.data() + (o * sp.len + begin) * sp.inner,
                static_cast<size_t>(out_len * sp.inner) * sizeof(double));
  }
  auto node = make_node(out_shape, std::move(out));
  attach(node, {x.node()}, [sp, begin, out_len](Node& self) {
    Node& p = *self.parents[0];
    p.ensure_grad();
    for (int64_t o = 0; o < sp.outer; ++o) {
      const double* g = self.grad.data() + o * out_len * sp.inner;
      double* d = p.grad.data() + (o * sp.len + begin) * sp.inner;
      for (int64_t i = 0; i < out_len * sp.inner; ++i) d[i] += g[i];
    }
  });
  return Tensor::wrap(node);
}

}  // namespace

Tensor slice_axis0(const Tensor& x, int64_t begin, int64_t end) {
  return slice_axis(x, 0, begin, end);
}

Tensor slice_channels(const Tensor& x, int64_t begin, int64_t end) {
  if (x.ndim() < 2) throw ShapeError("slice_channels: rank must be >= 2");
  return slice_axis(x, 1, begin, end);
}

namespace {

int64_t reflect_index(int64_t i, int64_t n) {
  // Mirror without repeating the edge sample; valid for pads < n.
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}

}  // namespace

Tensor pad2d(const Tensor& x, int top, int bottom, int left, int right, PadMode mode) {
  if (x.ndim() != 4) throw ShapeError("pad2d: input must be [N,C,H,W]");
  if (top < 0 || bottom < 0 || left < 0 || right < 0) throw ValueError("pad2d: negative pad");
  const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (mode == PadMode::Reflect &&
      (top >= h || bottom >= h || left >= w || right >= w)) {
    throw ValueError("pad2d: reflect pad must be smaller than the padded axis");
  }
  const int64_t ho = h + top + bottom, wo = w + left + right;
  // Row/column source maps: -1 denotes a zero-filled position.
  std::vector<int64_t> row_src(ho), col_src(wo);
  for (int64_t oh = 0; oh < ho; ++oh) {
    const int64_t ih = oh - top;
    row_src[oh] = (ih >= 0 && ih < h) ? ih
                  : (mode == PadMode::Reflect ? reflect_index(ih, h) : -1);
  }
  for (int64_t ow = 0; ow < wo; ++ow) {
    const int64_t iw = ow - left;
    col_src[ow] = (iw >= 0 && iw < w) ? iw
                  : (mode == PadMode::Reflect ? reflect_index(iw, w) : -1);
  }
  const auto& xv = x.node()->data;
  std::vector<double> out(static_cast<size_t>(n * c * ho * wo), 0.0);
  for (int64_t p = 0; p < n * c; ++p) {
    const double* xp = xv.data() + p * h * w;
    double* op = out.data() + p * ho * wo;
    for (int64_t oh = 0; oh < ho; ++oh) {
      if (row_src[oh] < 0) continue;
      const double* xrow = xp + row_src[oh] * w;
      double* orow = op + oh * wo;
      for (int64_t ow = 0; ow < wo; ++ow) {
        if (col_src[ow] >= 0) orow[ow] = xrow[col_src[ow]];
      }
    }
  }
  auto node = make_node({n, c, ho, wo}, std::move(out));
  attach(node, {x.node()}, [n, c, h, w, ho, wo, row_src, col_src](Node& self) {
    Node& p = *self.parents[0];
    p.ensure_grad();
    for (int64_t pl = 0; pl < n * c; ++pl) {
      double* dp = p.grad.data() + pl * h * w;
      const double* gp = self.grad.data() + pl * ho * wo;
      for (int64_t oh = 0; oh < ho; ++oh) {
        if (row_src[oh] < 0) continue;
        for (int64_t ow = 0; ow < wo; ++ow) {
          if (col_src[ow] >= 0) dp[row_src[oh] * w + col_src[ow]] += gp[oh * wo + ow];
        }
      }
    }
  });
  return Tensor::wrap(node);
}

Tensor crop2d(const Tensor& x, int64_t top, int64_t left, int64_t height, int64_t width) {
  if (x.ndim() != 4) throw ShapeError("crop2d: input must be [N,C,H,W]");
  const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (top < 0 || left < 0 || top + height > h || left + width > w || height < 1 || width < 1) {
    throw ShapeError("crop2d: window out of bounds");
  }
  const auto& xv = x.node()->data;
  std::vector<double> out(static_cast<size_t>(n * c * height * width));
  for (int64_t p = 0; p < n * c; ++p) {
    const double* xp = xv.data() + p * h * w;
    double* op = out.data() + p * height * width;
    for (int64_t r = 0; r < height; ++r) {
      std::memcpy(op + r * width, xp + (top + r) * w + left,
                  static_cast<size_t>(width) * sizeof(double));
    }
  }
  auto node = make_node({n, c, height, width}, std::move(out));
  attach(node, {x.node()}, [n, c, h, w, top, left, height, width](Node& self) {
    Node& p = *self.parents[0];
    p.ensure_grad();
    for (int64_t pl = 0; pl < n * c; ++pl) {
      double* dp = p.grad.data() + pl * h * w;
      const double* gp = self.grad.data() + pl * height * width;
      for (int64_t r = 0; r < height; ++r) {
        for (int64_t cw = 0; cw < width; ++cw) {
          dp[(top + r) * w + left + cw] += gp[r * width + cw];
        }
      }
    }
  });
  return Tensor::wrap(node);
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

Tensor mean_all(const Tensor& x) {
  const auto& xv = x.node()->data;
  double acc = 0.0;
  for (double v : xv) acc += v;
  const double inv = xv.empty() ? 0.0 : 1.0 / static_cast<double>(xv.size());
  auto node = make_node({1}, {acc * inv});
  attach(node, {x.node()}, [inv](Node& self) {
    Node& p = *self.parents[0];
    p.ensure_grad();
    const double g = self.grad[0] * inv;
    for (double& d : p.grad) d += g;
  });
  return Tensor::wrap(node);
}

Tensor sum_all(const Tensor& x) {
  const auto& xv = x.node()->data;
  double acc = 0.0;
  for (double v : xv) acc += v;
  auto node = make_node({1}, {acc});
  attach(node, {x.node()}, [](Node& self) {
    Node& p = *self.parents[0];
    p.ensure_grad();
    const double g = self.grad[0];
    for (double& d : p.grad) d += g;
  });
  return Tensor::wrap(node);
}

Tensor mean_axis(const Tensor& x, int axis) {
  checked_dim(x, axis, "mean_axis");
  const AxisSplit sp = split_at(x.shape(), axis);
  Shape out_shape;
  for (int i = 0; i < x.ndim(); ++i) {
    if (i != axis) out_shape.push_back(x.shape()[i]);
  }
  if (out_shape.empty()) out_shape = {1};
  const double inv = 1.0 / static_cast<double>(sp.len);
  const auto& xv = x.node()->data;
  std::vector<double> out(static_cast<size_t>(sp.outer * sp.inner), 0.0);
  for (int64_t o = 0; o < sp.outer; ++o) {
    for (int64_t j = 0; j < sp.len; ++j) {
      const double* xp = xv.data() + (o * sp.len + j) * sp.inner;
      double* op = out.data() + o * sp.inner;
      for (int64_t i = 0; i < sp.inner; ++i) op[i] += xp[i];
    }
  }
  for (double& v : out) v *= inv;
  auto node = make_node(out_shape, std::move(out));
  attach(node, {x.node()}, [sp, inv](Node& self) {
    Node& p = *self.parents[0];
    p.ensure_grad();
    for (int64_t o = 0; o < sp.outer; ++o) {
      const double* gp = self.grad.data() + o * sp.inner;
      for (int64_t j = 0; j < sp.len; ++j) {
        double* dp = p.grad.data() + (o * sp.len + j) * sp.inner;
        for (int64_t i = 0; i < sp.inner; ++i) dp[i] += gp[i] * inv;
      }
    }
  });
  return Tensor::wrap(node);
}

Tensor max_axis(const Tensor& x, int axis) {
  checked_dim(x, axis, "max_axis");
  const AxisSplit sp = split_at(x.shape(), axis);
  Shape out_shape;
  for (int i = 0; i < x.ndim(); ++i) {
    if (i != axis) out_shape.push_back(x.shape()[i]);
  }
  if (out_shape.empty()) out_shape = {1};
  const auto& xv = x.node()->data;
  std::vector<double> out(static_cast<size_t>(sp.outer * sp.inner),
                          -std::numeric_limits<double>::infinity());
  std::vector<int64_t> argmax(out.size(), 0);
  for (int64_t o = 0; o < sp.outer; ++o) {
    for (int64_t j = 0; j < sp.len; ++j) {
      const double* xp = xv.data() + (o * sp.len + j) * sp.inner;
      for (int64_t i = 0; i < sp.inner; ++i) {
        const int64_t oi = o * sp.inner + i;
        if (xp[i] > out[oi]) {  // first max wins on ties
          out[oi] = xp[i];
          argmax[oi] = j;
        }
      }
    }
  }
  auto node = make_node(out_shape, std::move(out));
  attach(node, {x.node()}, [sp, argmax](Node& self) {
    Node& p = *self.parents[0];
    p.ensure_grad();
    for (int64_t o = 0; o < sp.outer; ++o) {
      for (int64_t i = 0; i < sp.inner; ++i) {
        const int64_t oi = o * sp.inner + i;
        p.grad[(o * sp.len + argmax[oi]) * sp.inner + i] += self.grad[oi];
      }
    }
  });
  return Tensor::wrap(node);
}

// ---------------------------------------------------------------------------
// Resampling
// ---------------------------------------------------------------------------

Tensor nearest_upsample(const Tensor& x, int factor) {
  if (x.ndim() != 4) throw ShapeError("nearest_upsample: input must be [N,C,H,W]");
  if (factor < 1) throw ValueError("nearest_upsample: factor must be >= 1");
  const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int64_t ho = h * factor, wo = w * factor;
  const auto& xv = x.node()->data;
  std::vector<double> out(static_cast<size_t>(n * c * ho * wo));
  for (int64_t p = 0; p < n * c; ++p) {
    const double* xp = xv.data() + p * h * w;
    double* op = out.data() + p * ho * wo;
    for (int64_t oh = 0; oh < ho; ++oh) {
      const double* xrow = xp + (oh / factor) * w;
      double* orow = op + oh * wo;
      for (int64_t ow = 0; ow < wo; ++ow) orow[ow] = xrow[ow / factor];
    }
  }
  auto node = make_node({n, c, ho, wo}, std::move(out));
  attach(node, {x.node()}, [n, c, h, w, ho, wo, factor](Node& self) {
    Node& p = *self.parents[0];
    p.ensure_grad();
    for (int64_t pl = 0; pl < n * c; ++pl) {
      double* dp = p.grad.data() + pl * h * w;
      const double* gp = self.grad.data() + pl * ho * wo;
      for (int64_t oh = 0; oh < ho; ++oh) {
        for (int64_t ow = 0; ow < wo; ++ow) {
          dp[(oh / factor) * w + ow / factor] += gp[oh * wo + ow];
        }
      }
    }
  });
  return Tensor::wrap(node);
}

Tensor pixel_shuffle(const Tensor& x, int factor) {
  if (x.ndim() != 4) throw ShapeError("pixel_shuffle: input must be [N,C,H,W]");
  const int64_t r = factor;
  const int64_t n = x.dim(0), c_in = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (r < 1 || c_in % (r * r) != 0) {
    throw ShapeError("pixel_shuffle: channel axis " + std::to_string(c_in) +
                     " not divisible by factor^2");
  }
  const int64_t c = c_in / (r * r), ho = h * r, wo = w * r;
  const auto& xv = x.node()->data;
  std::vector<double> out(static_cast<size_t>(n * c * ho * wo));
  for (int64_t b = 0; b < n; ++b) {
    for (int64_t ch = 0; ch < c; ++ch) {
      for (int64_t dr = 0; dr < r; ++dr) {
        for (int64_t dc = 0; dc < r; ++dc) {
          const double* xp =
              xv.data() + ((b * c_in + ch * r * r + dr * r + dc) * h) * w;
          double* op = out.data() + (b * c + ch) * ho * wo;
          for (int64_t y = 0; y < h; ++y) {
            for (int64_t z = 0; z < w; ++z) {
              op[(y * r + dr) * wo + z * r + dc] = xp[y * w + z];
            }
          }
        }
      }
    }
  }
  auto node = make_node({n, c, ho, wo}, std::move(out));
  attach(node, {x.node()}, [n, c, c_in, h, w, ho, wo, r](Node& self) {
    Node& p = *self.parents[0];
    p.ensure_grad();
    for (int64_t b = 0; b < n; ++b) {
      for (int64_t ch = 0; ch < c; ++ch) {
        for (int64_t dr = 0; dr < r; ++dr) {
          for (int64_t dc = 0; dc < r; ++dc) {
            double* dp = p.grad.data() + ((b * c_in + ch * r * r + dr * r + dc) * h) * w;
            const double* gp = self.grad.data() + (b * c + ch) * ho * wo;
            for (int64_t y = 0; y < h; ++y) {
              for (int64_t z = 0; z < w; ++z) {
                dp[y * w + z] += gp[(y * r + dr) * wo + z * r + dc];
              }
            }
          }
        }
      }
    }
  });
  return Tensor::wrap(node);
}

namespace {

double keys_kernel(double t) {
  constexpr double a = -0.5;
  t = std::fabs(t);
  if (t <= 1.0) return (a + 2.0) * t * t * t - (a + 3.0) * t * t + 1.0;
  if (t < 2.0) return a * t * t * t - 5.0 * a * t * t + 8.0 * a * t - 4.0 * a;
  return 0.0;
}

struct ResampleTaps {
  std::vector<int64_t> index;   // flattened taps per output position
  std::vector<double> weight;
  int64_t taps = 0;
};

// MATLAB-style bicubic taps: when minifying, the kernel is widened by the
// inverse scale so the filter acts as a proper anti-aliasing low-pass.
ResampleTaps bicubic_taps(int64_t in, int64_t out) {
  const double scale = static_cast<double>(out) / static_cast<double>(in);
  const double kscale = std::min(scale, 1.0);
  const double support = 2.0 / kscale;
  const int64_t taps = static_cast<int64_t>(std::ceil(support) * 2 + 1);
  ResampleTaps rt;
  rt.taps = taps;
  rt.index.resize(out * taps);
  rt.weight.resize(out * taps);
  for (int64_t o = 0; o < out; ++o) {
    const double center = (o + 0.5) / scale - 0.5;
    const int64_t left = static_cast<int64_t>(std::floor(center - support)) + 1;
    double wsum = 0.0;
    for (int64_t t = 0; t < taps; ++t) {
      const int64_t i = left + t;
      const double wv = keys_kernel((center - i) * kscale) * kscale;
      rt.index[o * taps + t] = std::clamp<int64_t>(i, 0, in - 1);
      rt.weight[o * taps + t] = wv;
      wsum += wv;
    }
    if (wsum != 0.0) {
      for (int64_t t = 0; t < taps; ++t) rt.weight[o * taps + t] /= wsum;
    }
  }
  return rt;
}

}  // namespace

Tensor bicubic_resize(const Tensor& x, int64_t out_h, int64_t out_w) {
  if (x.ndim() != 4) throw ShapeError("bicubic_resize: input must be [N,C,H,W]");
  if (x.requires_grad()) {
    throw ValueError("bicubic_resize: forward-only, input must not require grad");
  }
  const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const ResampleTaps rh = bicubic_taps(h, out_h);
  const ResampleTaps rw = bicubic_taps(w, out_w);
  const auto& xv = x.node()->data;
  std::vector<double> tmp(static_cast<size_t>(h * out_w));
  std::vector<double> out(static_cast<size_t>(n * c * out_h * out_w));
  for (int64_t p = 0; p < n * c; ++p) {
    const double* xp = xv.data() + p * h * w;
    for (int64_t y = 0; y < h; ++y) {
      for (int64_t ow = 0; ow < out_w; ++ow) {
        double acc = 0.0;
        for (int64_t t = 0; t < rw.taps; ++t) {
          acc += rw.weight[ow * rw.taps + t] * xp[y * w + rw.index[ow * rw.taps + t]];
        }
        tmp[y * out_w + ow] = acc;
      }
    }
    double* op = out.data() + p * out_h * out_w;
    for (int64_t oh = 0; oh < out_h; ++oh) {
      for (int64_t ow = 0; ow < out_w; ++ow) {
        double acc = 0.0;
        for (int64_t t = 0; t < rh.taps; ++t) {
          acc += rh.weight[oh * rh.taps + t] * tmp[rh.index[oh * rh.taps + t] * out_w + ow];
        }
        op[oh * out_w + ow] = acc;
      }
    }
  }
  return Tensor::from_vector({n, c, out_h, out_w}, std::move(out));
}

// ---------------------------------------------------------------------------
// Temporal axis
// ---------------------------------------------------------------------------

Tensor temporal_replicate(const Tensor& x, int64_t time_steps) {
  if (time_steps < 1) throw ValueError("temporal_replicate: T must be >= 1");
  const int64_t rows = x.dim(0);
  const int64_t row_sz = x.numel() / rows;
  Shape out_shape = x.shape();
  out_shape[0] = rows * time_steps;
  const auto& xv = x.node()->data;
  std::vector<double> out(static_cast<size_t>(x.numel() * time_steps));
  for (int64_t t = 0; t < time_steps; ++t) {
    std::memcpy(out.data() + t * rows * row_sz, xv.data(),
                static_cast<size_t>(rows * row_sz) * sizeof(double));
  }
  auto node = make_node(out_shape, std::move(out));
  attach(node, {x.node()}, [time_steps, rows, row_sz](Node& self) {
    Node& p = *self.parents[0];
    p.ensure_grad();
    for (int64_t t = 0; t < time_steps; ++t) {
      const double* gp = self.grad.data() + t * rows * row_sz;
      for (int64_t i = 0; i < rows * row_sz; ++i) p.grad[i] += gp[i];
    }
  });
  return Tensor::wrap(node);
}

Tensor temporal_mean(const Tensor& x, int64_t time_steps) {
  if (time_steps < 1) throw ValueError("temporal_mean: T must be >= 1");
  const int64_t rows = x.dim(0);
  if (rows % time_steps != 0) {
    throw ShapeError("temporal_mean: leading axis " + std::to_string(rows) +
                     " not divisible by T=" + std::to_string(time_steps));
  }
  const int64_t n = rows / time_steps;
  const int64_t row_sz = x.numel() / rows;
  Shape out_shape = x.shape();
  out_shape[0] = n;
  const auto& xv = x.node()->data;
  std::vector<double> out(static_cast<size_t>(n * row_sz), 0.0);
  for (int64_t t = 0; t < time_steps; ++t) {
    const double* xp = xv.data() + t * n * row_sz;
    for (int64_t i = 0; i < n * row_sz; ++i) out[i] += xp[i];
  }
  const double inv = 1.0 / static_cast<double>(time_steps);
  for (double& v : out) v *= inv;
  auto node = make_node(out_shape, std::move(out));
  attach(node, {x.node()}, [time_steps, n, row_sz, inv](Node& self) {
    Node& p = *self.parents[0];
    p.ensure_grad();
    for (int64_t t = 0; t < time_steps; ++t) {
      double* dp = p.grad.data() + t * n * row_sz;
      for (int64_t i = 0; i < n * row_sz; ++i) dp[i] += self.grad[i] * inv;
    }
  });
  return Tensor::wrap(node);
}

// ---------------------------------------------------------------------------
// Spikes
// ---------------------------------------------------------------------------

SpikeTensor heaviside(const Tensor& x, const SurrogateSpec& surrogate) {
  surrogate.validate();
  const auto& xv = x.node()->data;
  std::vector<double> out(xv.size());
  int64_t ones = 0;
  for (size_t i = 0; i < xv.size(); ++i) {
    const double v = xv[i];
    if (std::isnan(v)) throw ValueError("heaviside: NaN in input");
    if (v >= 0.0) {
      out[i] = 1.0;
      ++ones;
    } else {
      out[i] = 0.0;
    }
  }
  auto node = make_node(x.shape(), std::move(out));
  attach(node, {x.node()}, [surrogate](Node& self) {
    Node& p = *self.parents[0];
    p.ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) {
      p.grad[i] += self.grad[i] * surrogate.derivative(p.data[i]);
    }
  });
  return SpikeTensor{Tensor::wrap(node), ones};
}

}  // namespace snnsir
