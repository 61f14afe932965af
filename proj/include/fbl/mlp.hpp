#pragma once

#include <cstdint>
#include <vector>

#include "fbl/mat.hpp"

namespace fbl {

enum class Activation { tanh, leaky_relu };

/// Fully connected feed-forward net with a linear output layer scaled by
/// output_gain and an optional fixed elementwise input scaling. Parameters
/// live in a single flat vector (per layer: row-major weights, then biases)
/// so black-box optimizers can perturb them directly. With all parameters
/// zero the output is exactly zero.
struct MlpSpec {
  std::vector<std::size_t> layers;  // e.g. {5, 32, 32, 6}
  Activation act = Activation::tanh;
  double output_gain = 1.0;
  Vec input_scale;  // empty means no scaling
};

class Mlp {
 public:
  explicit Mlp(MlpSpec spec);

  const MlpSpec& spec() const { return spec_; }
  std::size_t param_count() const { return n_params_; }
  Vec& params() { return params_; }
  const Vec& params() const { return params_; }

  // Uniform(-scale/sqrt(fan_in), +scale/sqrt(fan_in)) init, deterministic.
  void randomize(std::uint64_t seed, double scale = 1.0);

  Vec forward(const Vec& x) const;

  // Forward pass plus accumulation of d(gy . y)/dparams into gparams
  // (which must be zero-initialized by the caller). Returns y.
  Vec forward_backward(const Vec& x, const Vec& gy, Vec& gparams) const;

 private:
  MlpSpec spec_;
  std::size_t n_params_ = 0;
  Vec params_;
};

/// From-scratch Adam (beta1 = 0.9, beta2 = 0.999, eps = 1e-8).
class Adam {
 public:
  Adam(std::size_t n, double lr) : lr_(lr), m_(n, 0.0), v_(n, 0.0) {}

  void step(Vec& params, const Vec& grad);

 private:
  double lr_;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  long t_ = 0;
  Vec m_;
  Vec v_;
};

}  // namespace fbl
