#include "snnsir/lif.hpp"

#include <cmath>

namespace snnsir {

void LifParams::validate() const {
  if (!(tau > 1.0)) throw ConfigError("lif: tau must be > 1");
  if (!(u_th > u_rest)) throw ConfigError("lif: u_th must exceed u_rest");
}

LifNeuronLayer::LifNeuronLayer(const LifParams& params, const SurrogateSpec& surrogate)
    : params_(params), surrogate_(surrogate) {
  params_.validate();
  surrogate_.validate();
}

SpikeTensor lif_forward(const Tensor& x, int64_t time_steps, const LifParams& params,
                        const SurrogateSpec& surrogate, Tensor* final_membrane) {
  params.validate();
  if (time_steps < 1) throw ValueError("lif_forward: T must be >= 1");
  const int64_t rows = x.dim(0);
  if (rows % time_steps != 0) {
    throw ShapeError("lif_forward: leading axis " + std::to_string(rows) +
                     " not divisible by T=" + std::to_string(time_steps));
  }
  for (double v : x.data()) {
    if (std::isnan(v)) throw ValueError("lif_forward: NaN in input");
  }
  const int64_t n = rows / time_steps;
  const double inv_tau = 1.0 / params.tau;

  Shape slice_shape = x.shape();
  slice_shape[0] = n;
  Tensor v = Tensor::full(slice_shape, params.u_rest);

  std::vector<Tensor> spikes;
  spikes.reserve(time_steps);
  int64_t ones = 0;
  for (int64_t t = 0; t < time_steps; ++t) {
    Tensor x_t = slice_axis0(x, t * n, (t + 1) * n);
    // charge: U = V + (1/tau) (X - (V - u_rest))
    Tensor drive = sub(x_t, add_scalar(v, -params.u_rest));
    Tensor u = add(v, mul_scalar(drive, inv_tau));
    // fire: S = theta(U - u_th)
    SpikeTensor s = heaviside(add_scalar(u, -params.u_th), surrogate);
    ones += s.ones;
    // reset: V = (1 - S) U + S u_rest, spike gate detached
    Tensor s_const = s.values.detach();
    v = add(mul(rsub_scalar(1.0, s_const), u), mul_scalar(s_const, params.u_rest));
    spikes.push_back(s.values);
  }
  if (final_membrane) *final_membrane = v.detach();
  Tensor stacked = time_steps == 1 ? spikes[0] : concat(spikes, 0);
  return SpikeTensor{stacked, ones};
}

SpikeTensor LifNeuronLayer::forward(const Tensor& x, int64_t time_steps) {
  Tensor final_v;
  SpikeTensor s = lif_forward(x, time_steps, params_, surrogate_, &final_v);
  v_ = final_v;
  return s;
}

void LifNeuronLayer::reset_state() {
  if (v_.defined()) {
    Tensor fresh = Tensor::full(v_.shape(), params_.u_rest);
    v_ = fresh;
  }
}

// ---------------------------------------------------------------------------
// tdBN
// ---------------------------------------------------------------------------

TdBnLayer::TdBnLayer(int64_t ch, double eps_, double momentum_)
    : eps(eps_), momentum(momentum_), channels_(ch) {
  gamma = Tensor::ones({ch}, true);
  beta = Tensor::zeros({ch}, true);
  running_mean.assign(static_cast<size_t>(ch), 0.0);
  running_var.assign(static_cast<size_t>(ch), 1.0);
}

Tensor TdBnLayer::forward(const Tensor& x, bool training) {
  if (x.ndim() != 4) throw ShapeError("tdbn: input must be [T*N,C,H,W]");
  const int64_t r = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  if (c != channels_) {
    throw ShapeError("tdbn: channel axis is " + std::to_string(c) + " but layer has " +
                     std::to_string(channels_) + " channels");
  }
  const auto xv = x.data();
  const int64_t m = r * hw;  // positions pooled per channel
  std::vector<double> mean(static_cast<size_t>(c), 0.0);
  std::vector<double> invstd(static_cast<size_t>(c), 0.0);

  if (training) {
    std::vector<double> var(static_cast<size_t>(c), 0.0);
    for (int64_t ch = 0; ch < c; ++ch) {
      double acc = 0.0;
      for (int64_t b = 0; b < r; ++b) {
        const double* p = xv.data() + (b * c + ch) * hw;
        for (int64_t i = 0; i < hw; ++i) acc += p[i];
      }
      mean[ch] = acc / static_cast<double>(m);
      double vacc = 0.0;
      for (int64_t b = 0; b < r; ++b) {
        const double* p = xv.data() + (b * c + ch) * hw;
        for (int64_t i = 0; i < hw; ++i) {
          const double d = p[i] - mean[ch];
          vacc += d * d;
        }
      }
      var[ch] = vacc / static_cast<double>(m);
      invstd[ch] = 1.0 / std::sqrt(var[ch] + eps);
    }
    for (int64_t ch = 0; ch < c; ++ch) {
      const double unbiased = m > 1 ? var[ch] * static_cast<double>(m) /
                                          static_cast<double>(m - 1)
                                    : var[ch];
      running_mean[ch] = (1.0 - momentum) * running_mean[ch] + momentum * mean[ch];
      running_var[ch] = (1.0 - momentum) * running_var[ch] + momentum * unbiased;
    }
  } else {
    for (int64_t ch = 0; ch < c; ++ch) {
      mean[ch] = running_mean[ch];
      invstd[ch] = 1.0 / std::sqrt(running_var[ch] + eps);
    }
  }

  const auto gv = gamma.data();
  const auto bv = beta.data();
  std::vector<double> out(xv.size());
  for (int64_t b = 0; b < r; ++b) {
    for (int64_t ch = 0; ch < c; ++ch) {
      const double* p = xv.data() + (b * c + ch) * hw;
      double* o = out.data() + (b * c + ch) * hw;
      const double mu = mean[ch], is = invstd[ch], g = gv[ch], bb = bv[ch];
      for (int64_t i = 0; i < hw; ++i) o[i] = g * (p[i] - mu) * is + bb;
    }
  }

  auto node = std::make_shared<detail::Node>();
  node->shape = x.shape();
  node->data = std::move(out);
  Tensor y = Tensor::wrap(node);

  if (!grad_mode_enabled() ||
      !(x.requires_grad() || gamma.requires_grad() || beta.requires_grad())) {
    return y;
  }
  node->requires_grad = true;
  node->parents = {x.node(), gamma.node(), beta.node()};
  const int64_t rr = r, cc = c, hh = hw, mm = m;
  node->backward_fn = [rr, cc, hh, mm, mean, invstd, training](detail::Node& self) {
    detail::Node& px = *self.parents[0];
    detail::Node& pg = *self.parents[1];
    detail::Node& pb = *self.parents[2];
    // Per-channel reductions of the upstream grad and of g*xhat.
    std::vector<double> sum_g(static_cast<size_t>(cc), 0.0);
    std::vector<double> sum_gx(static_cast<size_t>(cc), 0.0);
    for (int64_t b = 0; b < rr; ++b) {
      for (int64_t ch = 0; ch < cc; ++ch) {
        const double* gp = self.grad.data() + (b * cc + ch) * hh;
        const double* xp = px.data.data() + (b * cc + ch) * hh;
        const double mu = mean[ch], is = invstd[ch];
        double a = 0.0, gx = 0.0;
        for (int64_t i = 0; i < hh; ++i) {
          a += gp[i];
          gx += gp[i] * (xp[i] - mu) * is;
        }
        sum_g[ch] += a;
        sum_gx[ch] += gx;
      }
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (int64_t ch = 0; ch < cc; ++ch) pb.grad[ch] += sum_g[ch];
    }
    if (pg.requires_grad) {
      pg.ensure_grad();
      for (int64_t ch = 0; ch < cc; ++ch) pg.grad[ch] += sum_gx[ch];
    }
    if (px.requires_grad) {
      px.ensure_grad();
      const double inv_m = 1.0 / static_cast<double>(mm);
      for (int64_t b = 0; b < rr; ++b) {
        for (int64_t ch = 0; ch < cc; ++ch) {
          const double* gp = self.grad.data() + (b * cc + ch) * hh;
          const double* xp = px.data.data() + (b * cc + ch) * hh;
          double* dp = px.grad.data() + (b * cc + ch) * hh;
          const double mu = mean[ch], is = invstd[ch], g = pg.data[ch];
          if (training) {
            const double mg = sum_g[ch] * inv_m;
            const double mgx = sum_gx[ch] * inv_m;
            for (int64_t i = 0; i < hh; ++i) {
              const double xhat = (xp[i] - mu) * is;
              dp[i] += g * is * (gp[i] - mg - xhat * mgx);
            }
          } else {
            for (int64_t i = 0; i < hh; ++i) dp[i] += g * is * gp[i];
          }
        }
      }
    }
  };
  return y;
}

}  // namespace snnsir
