#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dss/rng.hpp"

namespace dss {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { Linear, Relu, Tanh, Softmax };

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::Linear: return "linear";
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
    case Activation::Softmax: return "softmax";
  }
  return "?";
}

/// Column-wise softmax, shifted by the column max.
inline Matrix softmax_columns(const Matrix& z) {
  Matrix out(z.rows(), z.cols());
  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    const double m = z.col(c).maxCoeff();
    out.col(c) = (z.col(c).array() - m).exp();
    out.col(c) /= out.col(c).sum();
  }
  return out;
}

inline Matrix activate(Activation a, const Matrix& z) {
  switch (a) {
    case Activation::Linear: return z;
    case Activation::Relu: return z.cwiseMax(0.0);
    case Activation::Tanh: return z.array().tanh().matrix();
    case Activation::Softmax: return softmax_columns(z);
  }
  return z;
}

/// dL/dz given the activation output y and dL/dy.
inline Matrix activation_backward(Activation a, const Matrix& y, const Matrix& dy) {
  switch (a) {
    case Activation::Linear: return dy;
    case Activation::Relu: return (y.array() > 0.0).select(dy, 0.0);
    case Activation::Tanh: return (dy.array() * (1.0 - y.array().square())).matrix();
    case Activation::Softmax: {
      Matrix dz(dy.rows(), dy.cols());
      for (Eigen::Index c = 0; c < dy.cols(); ++c) {
        const double dot = y.col(c).dot(dy.col(c));
        dz.col(c) = (y.col(c).array() * (dy.col(c).array() - dot)).matrix();
      }
      return dz;
    }
  }
  return dy;
}

/// Fully connected layer y = act(W x + b); inputs are column-batched.
struct DenseLayer {
  Matrix weight;  // outputs x inputs
  Vector bias;
  Activation activation = Activation::Linear;

  DenseLayer() = default;
  DenseLayer(int inputs, int outputs, Activation act)
      : weight(Matrix::Zero(outputs, inputs)), bias(Vector::Zero(outputs)), activation(act) {}

  int inputs() const { return static_cast<int>(weight.cols()); }
  int outputs() const { return static_cast<int>(weight.rows()); }
  Eigen::Index parameter_count() const { return weight.size() + bias.size(); }

  Matrix preactivation(const Matrix& x) const {
    Matrix z = weight * x;
    z.colwise() += bias;
    return z;
  }
  Matrix forward(const Matrix& x) const { return activate(activation, preactivation(x)); }

  /// Glorot-uniform weights, zero bias.
  void init_uniform(Rng& rng) {
    const double limit = std::sqrt(6.0 / (inputs() + outputs()));
    for (Eigen::Index i = 0; i < weight.size(); ++i)
      weight.data()[i] = (2.0 * uniform01(rng) - 1.0) * limit;
    bias.setZero();
  }

  void set_zero() {
    weight.setZero();
    bias.setZero();
  }

  /// Accumulates parameter gradients into `grad` for pre-activation gradient
  /// `dz` at input `x`; returns dL/dx.
  Matrix backward(const Matrix& x, const Matrix& dz, DenseLayer& grad) const {
    grad.weight.noalias() += dz * x.transpose();
    grad.bias += dz.rowwise().sum();
    return weight.transpose() * dz;
  }

  bool all_finite() const { return weight.allFinite() && bias.allFinite(); }
};

/// Stack of dense layers applied in order.
struct Mlp {
  std::vector<DenseLayer> layers;

  /// Activations of every layer: out[0] = x, out[i+1] = layer i output.
  std::vector<Matrix> forward_all(const Matrix& x) const {
    std::vector<Matrix> out;
    out.reserve(layers.size() + 1);
    out.push_back(x);
    for (const auto& l : layers) out.push_back(l.forward(out.back()));
    return out;
  }

  Matrix forward(const Matrix& x) const {
    Matrix h = x;
    for (const auto& l : layers) h = l.forward(h);
    return h;
  }

  /// Backpropagates dL/d(output) through the stack; returns dL/dx.
  Matrix backward(const std::vector<Matrix>& acts, Matrix dy, Mlp& grad) const {
    for (std::size_t i = layers.size(); i-- > 0;) {
      const Matrix dz = activation_backward(layers[i].activation, acts[i + 1], dy);
      dy = layers[i].backward(acts[i], dz, grad.layers[i]);
    }
    return dy;
  }
};

/// Adam with bias correction.
struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamSlot {
  std::vector<double> m;
  std::vector<double> v;
};

/// Optimizer state for a fixed list of parameter blocks.
class Adam {
 public:
  Adam() = default;
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

  const AdamConfig& config() const { return cfg_; }
  std::int64_t steps() const { return step_; }

  void step(const std::vector<std::span<double>>& params,
            const std::vector<std::span<const double>>& grads) {
    if (params.size() != grads.size()) throw std::invalid_argument("adam: block count mismatch");
    if (slots_.empty()) {
      slots_.resize(params.size());
      for (std::size_t i = 0; i < params.size(); ++i) {
        slots_[i].m.assign(params[i].size(), 0.0);
        slots_[i].v.assign(params[i].size(), 0.0);
      }
    }
    if (slots_.size() != params.size()) throw std::invalid_argument("adam: parameter layout changed");
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (std::size_t b = 0; b < params.size(); ++b) {
      auto& s = slots_[b];
      if (s.m.size() != params[b].size() || grads[b].size() != params[b].size())
        throw std::invalid_argument("adam: block size mismatch");
      for (std::size_t i = 0; i < params[b].size(); ++i) {
        const double g = grads[b][i];
        s.m[i] = cfg_.beta1 * s.m[i] + (1.0 - cfg_.beta1) * g;
        s.v[i] = cfg_.beta2 * s.v[i] + (1.0 - cfg_.beta2) * g * g;
        const double mhat = s.m[i] / bc1;
        const double vhat = s.v[i] / bc2;
        params[b][i] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.epsilon);
      }
    }
  }

 private:
  AdamConfig cfg_;
  std::int64_t step_ = 0;
  std::vector<AdamSlot> slots_;
};

}  // namespace dss
