#include "fbl/mlp.hpp"

#include <cmath>
#include <stdexcept>

#include "fbl/rng.hpp"

namespace fbl {

namespace {

constexpr double kLeakySlope = 0.01;

double activate(Activation a, double z) {
  return a == Activation::tanh ? std::tanh(z)
                               : (z > 0.0 ? z : kLeakySlope * z);
}

double activate_grad(Activation a, double z, double h) {
  if (a == Activation::tanh) return 1.0 - h * h;
  (void)z;
  return h >= 0.0 ? 1.0 : kLeakySlope;
}

}  // namespace

Mlp::Mlp(MlpSpec spec) : spec_(std::move(spec)) {
  if (spec_.layers.size() < 2)
    throw std::invalid_argument("Mlp: need at least input and output layer");
  if (!spec_.input_scale.empty() &&
      spec_.input_scale.size() != spec_.layers.front())
    throw std::invalid_argument("Mlp: input_scale size mismatch");
  for (std::size_t l = 0; l + 1 < spec_.layers.size(); ++l)
    n_params_ += spec_.layers[l] * spec_.layers[l + 1] + spec_.layers[l + 1];
  params_.assign(n_params_, 0.0);
}

void Mlp::randomize(std::uint64_t seed, double scale) {
  Rng rng(seed);
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < spec_.layers.size(); ++l) {
    const std::size_t in = spec_.layers[l];
    const std::size_t out = spec_.layers[l + 1];
    const double s = scale / std::sqrt(static_cast<double>(in));
    for (std::size_t k = 0; k < in * out; ++k)
      params_[off + k] = rng.uniform(-s, s);
    off += in * out;
    for (std::size_t k = 0; k < out; ++k) params_[off + k] = 0.0;
    off += out;
  }
}

Vec Mlp::forward(const Vec& x) const {
  if (x.size() != spec_.layers.front())
    throw std::invalid_argument("Mlp: input size mismatch");
  Vec h = x;
  if (!spec_.input_scale.empty())
    for (std::size_t i = 0; i < h.size(); ++i) h[i] *= spec_.input_scale[i];
  std::size_t off = 0;
  const std::size_t n_layers = spec_.layers.size();
  for (std::size_t l = 0; l + 1 < n_layers; ++l) {
    const std::size_t in = spec_.layers[l];
    const std::size_t out = spec_.layers[l + 1];
    Vec z(out);
    for (std::size_t i = 0; i < out; ++i) {
      double acc = params_[off + in * out + i];  // bias
      const double* w = &params_[off + i * in];
      for (std::size_t j = 0; j < in; ++j) acc += w[j] * h[j];
      z[i] = acc;
    }
    off += in * out + out;
    const bool last = (l + 2 == n_layers);
    if (last) {
      for (std::size_t i = 0; i < out; ++i) z[i] *= spec_.output_gain;
      return z;
    }
    for (std::size_t i = 0; i < out; ++i) z[i] = activate(spec_.act, z[i]);
    h = std::move(z);
  }
  return h;  // unreachable for valid specs
}

Vec Mlp::forward_backward(const Vec& x, const Vec& gy, Vec& gparams) const {
  if (gparams.size() != n_params_)
    throw std::invalid_argument("Mlp: gradient buffer size mismatch");
  const std::size_t n_layers = spec_.layers.size();

  // Forward with cached activations per layer.
  std::vector<Vec> acts(n_layers);
  acts[0] = x;
  if (!spec_.input_scale.empty())
    for (std::size_t i = 0; i < acts[0].size(); ++i)
      acts[0][i] *= spec_.input_scale[i];
  std::vector<std::size_t> offsets(n_layers - 1);
  {
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < n_layers; ++l) {
      offsets[l] = off;
      const std::size_t in = spec_.layers[l];
      const std::size_t out = spec_.layers[l + 1];
      Vec z(out);
      for (std::size_t i = 0; i < out; ++i) {
        double acc = params_[off + in * out + i];
        const double* w = &params_[off + i * in];
        for (std::size_t j = 0; j < in; ++j) acc += w[j] * acts[l][j];
        z[i] = acc;
      }
      off += in * out + out;
      if (l + 2 == n_layers) {
        for (std::size_t i = 0; i < out; ++i) z[i] *= spec_.output_gain;
      } else {
        for (std::size_t i = 0; i < out; ++i) z[i] = activate(spec_.act, z[i]);
      }
      acts[l + 1] = std::move(z);
    }
  }

  // Backward: delta starts as gain-scaled cotangent of the linear output.
  Vec delta(gy.size());
  for (std::size_t i = 0; i < gy.size(); ++i)
    delta[i] = gy[i] * spec_.output_gain;
  for (std::size_t l = n_layers - 1; l-- > 0;) {
    const std::size_t in = spec_.layers[l];
    const std::size_t out = spec_.layers[l + 1];
    const std::size_t off = offsets[l];
    for (std::size_t i = 0; i < out; ++i) {
      const double d = delta[i];
      double* gw = &gparams[off + i * in];
      for (std::size_t j = 0; j < in; ++j) gw[j] += d * acts[l][j];
      gparams[off + in * out + i] += d;
    }
    if (l == 0) break;
    Vec prev(in, 0.0);
    for (std::size_t i = 0; i < out; ++i) {
      const double d = delta[i];
      const double* w = &params_[off + i * in];
      for (std::size_t j = 0; j < in; ++j) prev[j] += d * w[j];
    }
    // Undo the activation of layer l (acts[l] holds post-activation values).
    for (std::size_t j = 0; j < in; ++j)
      prev[j] *= activate_grad(spec_.act, 0.0, acts[l][j]);
    delta = std::move(prev);
  }
  return acts[n_layers - 1];
}

void Adam::step(Vec& params, const Vec& grad) {
  ++t_;
  const double b1t = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double b2t = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    const double mhat = m_[i] / b1t;
    const double vhat = v_[i] / b2t;
    params[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
  }
}

}  // namespace fbl
