#pragma once

// Dense feed-forward network with one sigmoid or linear output unit.
//
// Samples are rows: a batch X is n x input_dim and layer l maps
// A_{l-1} (n x in) to A_l = act(A_{l-1} W_l^T + b_l^T) (n x out). Hidden
// layers use inverted dropout in training mode: kept units are scaled by
// 1 / (1 - dropout) so inference needs no correction.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hybridscreen/errors.hpp"
#include "hybridscreen/seeds.hpp"

namespace hybridscreen {

enum class InitMode { uniform, lecun_uniform, normal, glorot_normal, he_normal, he_uniform };
enum class Activation { relu, sigmoid };
enum class OutputKind { sigmoid_probability, linear_value };

std::string to_string(InitMode mode);
std::string to_string(Activation act);
std::string to_string(OutputKind kind);
InitMode parse_init_mode(const std::string& text);
Activation parse_activation(const std::string& text);
OutputKind parse_output_kind(const std::string& text);

struct SnnHyperparams {
  int hidden_layers = 1;
  int hidden_units = 10;
  double dropout = 0.0;
  int epochs = 20;
  int batch_size = 32;
  InitMode init = InitMode::he_normal;
  Activation activation = Activation::relu;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;

  /// Throws ConfigError on out-of-range fields.
  void validate() const;

  friend bool operator==(const SnnHyperparams&, const SnnHyperparams&) = default;
};

template <typename Scalar>
struct DenseLayer {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> weights;  // out x in
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> bias;                  // out

  Eigen::Index fan_in() const { return weights.cols(); }
  Eigen::Index fan_out() const { return weights.rows(); }
};

template <typename Scalar>
struct Network {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  std::vector<DenseLayer<Scalar>> layers;  // hidden layers then the 1-unit output layer
  Activation activation = Activation::relu;
  OutputKind output = OutputKind::sigmoid_probability;

  Eigen::Index input_dim() const { return layers.empty() ? 0 : layers.front().fan_in(); }
  std::size_t hidden_count() const { return layers.size() - 1; }
};

using SnnModel = Network<double>;

/// One 0/1 matrix per hidden layer, shaped n x units.
template <typename Scalar>
using DropoutMasks = std::vector<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>>;

template <typename Scalar>
struct Gradients {
  std::vector<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> weights;
  std::vector<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> bias;
};

template <typename Scalar>
struct ForwardCache {
  std::vector<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> pre;   // per layer, before activation
  std::vector<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> post;  // hidden outputs after dropout
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> output;
};

inline constexpr double kProbabilityClamp = 1e-7;

namespace detail {

template <typename Derived>
auto activate(const Eigen::MatrixBase<Derived>& z, Activation act) {
  using Scalar = typename Derived::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (act == Activation::relu) return Matrix(z.cwiseMax(Scalar(0)));
  return Matrix((Scalar(1) + (-z.array()).exp()).inverse().matrix());
}

// Derivative of the activation expressed through pre-activations.
template <typename Derived>
auto activate_derivative(const Eigen::MatrixBase<Derived>& z, Activation act) {
  using Scalar = typename Derived::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (act == Activation::relu) return Matrix((z.array() > Scalar(0)).template cast<Scalar>().matrix());
  Matrix s = activate(z, Activation::sigmoid);
  return Matrix(s.array() * (Scalar(1) - s.array()));
}

template <typename Scalar>
void check_input(const Network<Scalar>& net, Eigen::Index cols) {
  if (cols != net.input_dim()) {
    throw DataError("network expects " + std::to_string(net.input_dim()) + " input columns, got " +
                    std::to_string(cols));
  }
}

}  // namespace detail

template <typename Scalar = double>
Network<Scalar> init_model(const SnnHyperparams& hp, Eigen::Index input_dim,
                           OutputKind output = OutputKind::sigmoid_probability) {
  hp.validate();
  if (input_dim < 1) throw ConfigError("network input dimension must be >= 1");
  Rng rng(derive_seed(hp.seed, 0));
  Network<Scalar> net;
  net.activation = hp.activation;
  net.output = output;

  Eigen::Index fan_in = input_dim;
  for (int l = 0; l <= hp.hidden_layers; ++l) {
    const Eigen::Index fan_out = l == hp.hidden_layers ? 1 : hp.hidden_units;
    const double in = static_cast<double>(fan_in);
    const double out = static_cast<double>(fan_out);
    DenseLayer<Scalar> layer;
    layer.weights.resize(fan_out, fan_in);
    layer.bias = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(fan_out);

    auto fill = [&](auto&& dist) {
      for (Eigen::Index j = 0; j < fan_in; ++j) {
        for (Eigen::Index i = 0; i < fan_out; ++i) layer.weights(i, j) = static_cast<Scalar>(dist(rng));
      }
    };
    switch (hp.init) {
      case InitMode::uniform: fill(std::uniform_real_distribution<double>(-0.05, 0.05)); break;
      case InitMode::normal: fill(std::normal_distribution<double>(0.0, 0.05)); break;
      case InitMode::lecun_uniform: {
        const double limit = std::sqrt(3.0 / in);
        fill(std::uniform_real_distribution<double>(-limit, limit));
        break;
      }
      case InitMode::he_uniform: {
        const double limit = std::sqrt(6.0 / in);
        fill(std::uniform_real_distribution<double>(-limit, limit));
        break;
      }
      case InitMode::he_normal: fill(std::normal_distribution<double>(0.0, std::sqrt(2.0 / in))); break;
      case InitMode::glorot_normal:
        fill(std::normal_distribution<double>(0.0, std::sqrt(2.0 / (in + out))));
        break;
    }
    net.layers.push_back(std::move(layer));
    fan_in = fan_out;
  }
  return net;
}

/// Forward pass keeping intermediate values. `masks` may be null (no dropout).
template <typename Scalar, typename Derived>
ForwardCache<Scalar> forward_cached(const Network<Scalar>& net, const Eigen::MatrixBase<Derived>& x,
                                    const DropoutMasks<Scalar>* masks, double dropout) {
  using Matrix = typename Network<Scalar>::Matrix;
  detail::check_input(net, x.cols());
  if (masks && masks->size() != net.hidden_count()) throw DataError("one dropout mask per hidden layer expected");
  const Scalar keep_scale = masks ? static_cast<Scalar>(1.0 / (1.0 - dropout)) : Scalar(1);

  ForwardCache<Scalar> cache;
  Matrix a = x.template cast<Scalar>();
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& layer = net.layers[l];
    Matrix z = a * layer.weights.transpose();
    z.rowwise() += layer.bias.transpose();
    cache.pre.push_back(z);
    if (l + 1 == net.layers.size()) {
      if (net.output == OutputKind::sigmoid_probability) {
        cache.output = detail::activate(z, Activation::sigmoid).col(0);
      } else {
        cache.output = z.col(0);
      }
      break;
    }
    a = detail::activate(z, net.activation);
    if (masks) {
      const auto& m = (*masks)[l];
      if (m.rows() != a.rows() || m.cols() != a.cols()) throw DataError("dropout mask shape mismatch");
      a = (a.array() * m.array() * keep_scale).matrix();
    }
    cache.post.push_back(a);
  }
  return cache;
}

/// Inference: no dropout, no scaling.
template <typename Scalar, typename Derived>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> forward(const Network<Scalar>& net, const Eigen::MatrixBase<Derived>& x) {
  return forward_cached<Scalar>(net, x, nullptr, 0.0).output;
}

template <typename Scalar>
DropoutMasks<Scalar> draw_masks(const Network<Scalar>& net, Eigen::Index rows, double dropout, Rng& rng) {
  DropoutMasks<Scalar> masks;
  std::bernoulli_distribution keep(1.0 - dropout);
  for (std::size_t l = 0; l + 1 < net.layers.size(); ++l) {
    typename Network<Scalar>::Matrix m(rows, net.layers[l].fan_out());
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = keep(rng) ? Scalar(1) : Scalar(0);
    }
    masks.push_back(std::move(m));
  }
  return masks;
}

/// Training-mode forward: fresh Bernoulli(1 - dropout) masks on hidden layers.
template <typename Scalar, typename Derived>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> forward(const Network<Scalar>& net, const Eigen::MatrixBase<Derived>& x,
                                                 double dropout, Rng& rng) {
  if (dropout <= 0.0) return forward(net, x);
  const auto masks = draw_masks(net, x.rows(), dropout, rng);
  return forward_cached<Scalar>(net, x, &masks, dropout).output;
}

/// Mean BCE (clamped probabilities) or mean squared error of the batch.
template <typename Scalar, typename DerivedY>
Scalar batch_loss(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& output, const Eigen::MatrixBase<DerivedY>& y,
                  OutputKind kind) {
  const auto n = static_cast<Scalar>(output.size());
  Scalar total = 0;
  for (Eigen::Index i = 0; i < output.size(); ++i) {
    const Scalar t = static_cast<Scalar>(y[i]);
    if (kind == OutputKind::sigmoid_probability) {
      const Scalar lo = static_cast<Scalar>(kProbabilityClamp);
      const Scalar p = std::clamp(output[i], lo, Scalar(1) - lo);
      total -= t * std::log(p) + (Scalar(1) - t) * std::log(Scalar(1) - p);
    } else {
      total += (output[i] - t) * (output[i] - t);
    }
  }
  return total / n;
}

template <typename Scalar, typename DerivedX, typename DerivedY>
Scalar loss(const Network<Scalar>& net, const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedY>& y,
            const DropoutMasks<Scalar>* masks = nullptr, double dropout = 0.0) {
  return batch_loss<Scalar>(forward_cached<Scalar>(net, x, masks, dropout).output, y, net.output);
}

/// Backpropagation through a cached forward pass. The output delta is the
/// exact derivative of batch_loss, which is zero where the clamp is active.
template <typename Scalar, typename DerivedX, typename DerivedY>
Gradients<Scalar> backward(const Network<Scalar>& net, const ForwardCache<Scalar>& cache,
                           const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedY>& y,
                           const DropoutMasks<Scalar>* masks, double dropout) {
  using Matrix = typename Network<Scalar>::Matrix;
  const Eigen::Index n = x.rows();
  const Scalar inv_n = Scalar(1) / static_cast<Scalar>(n);

  Matrix delta(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar o = cache.output[i];
    const Scalar t = static_cast<Scalar>(y[i]);
    if (net.output == OutputKind::sigmoid_probability) {
      const Scalar lo = static_cast<Scalar>(kProbabilityClamp);
      delta(i, 0) = (o > lo && o < Scalar(1) - lo) ? (o - t) * inv_n : Scalar(0);
    } else {
      delta(i, 0) = Scalar(2) * (o - t) * inv_n;
    }
  }

  const std::size_t depth = net.layers.size();
  Gradients<Scalar> g;
  g.weights.resize(depth);
  g.bias.resize(depth);
  const Scalar keep_scale = masks ? static_cast<Scalar>(1.0 / (1.0 - dropout)) : Scalar(1);
  for (std::size_t l = depth; l-- > 0;) {
    const Matrix input = l == 0 ? Matrix(x.template cast<Scalar>()) : cache.post[l - 1];
    g.weights[l] = delta.transpose() * input;
    g.bias[l] = delta.colwise().sum().transpose();
    if (l == 0) break;
    Matrix upstream = delta * net.layers[l].weights;
    if (masks) upstream = (upstream.array() * (*masks)[l - 1].array() * keep_scale).matrix();
    delta = (upstream.array() * detail::activate_derivative(cache.pre[l - 1], net.activation).array()).matrix();
  }
  return g;
}

/// Analytic gradients of the batch loss under fixed dropout masks (or none).
template <typename Scalar, typename DerivedX, typename DerivedY>
Gradients<Scalar> gradients(const Network<Scalar>& net, const Eigen::MatrixBase<DerivedX>& x,
                            const Eigen::MatrixBase<DerivedY>& y, const DropoutMasks<Scalar>* masks = nullptr,
                            double dropout = 0.0) {
  if (y.size() != x.rows()) throw DataError("gradients: label count does not match rows");
  const auto cache = forward_cached<Scalar>(net, x, masks, dropout);
  return backward(net, cache, x, y, masks, dropout);
}

/// Adam with bias correction.
template <typename Scalar>
class AdamOptimizer {
 public:
  AdamOptimizer(const Network<Scalar>& net, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                double epsilon = 1e-8)
      : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {
    for (const auto& layer : net.layers) {
      m_.weights.push_back(decltype(layer.weights)::Zero(layer.weights.rows(), layer.weights.cols()));
      v_.weights.push_back(m_.weights.back());
      m_.bias.push_back(decltype(layer.bias)::Zero(layer.bias.size()));
      v_.bias.push_back(m_.bias.back());
    }
  }

  void step(Network<Scalar>& net, const Gradients<Scalar>& g) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    const auto step_size = static_cast<Scalar>(lr_ * std::sqrt(c2) / c1);
    const auto eps_hat = static_cast<Scalar>(eps_ * std::sqrt(c2));
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      update(net.layers[l].weights, m_.weights[l], v_.weights[l], g.weights[l], step_size, eps_hat);
      update(net.layers[l].bias, m_.bias[l], v_.bias[l], g.bias[l], step_size, eps_hat);
    }
  }

 private:
  template <typename Param, typename Grad>
  void update(Param& p, Param& m, Param& v, const Grad& g, Scalar step_size, Scalar eps_hat) {
    const auto b1 = static_cast<Scalar>(beta1_);
    const auto b2 = static_cast<Scalar>(beta2_);
    m = b1 * m + (Scalar(1) - b1) * g;
    v = (b2 * v.array() + (Scalar(1) - b2) * g.array().square()).matrix();
    p.array() -= step_size * m.array() / (v.array().sqrt() + eps_hat);
  }

  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  Gradients<Scalar> m_, v_;
};

template <typename Scalar>
struct TrainResult {
  Network<Scalar> model;
  std::vector<double> loss_log;  // one entry per epoch: mean training-mode batch loss
};

/// Mini-batch Adam training. Rows are reshuffled every epoch, the trailing
/// partial batch is kept, and each batch gets fresh dropout masks.
template <typename Scalar = double, typename DerivedX, typename DerivedY>
TrainResult<Scalar> train(const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedY>& y,
                          const SnnHyperparams& hp, OutputKind output) {
  hp.validate();
  if (x.rows() == 0) throw DataError("train: empty input");
  if (y.size() != x.rows()) throw DataError("train: label count does not match rows");

  TrainResult<Scalar> result{init_model<Scalar>(hp, x.cols(), output), {}};
  auto& net = result.model;
  AdamOptimizer<Scalar> adam(net, hp.learning_rate);
  Rng rng(derive_seed(hp.seed, 1));

  const Eigen::Index n = x.rows();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const typename Network<Scalar>::Matrix xs = x.template cast<Scalar>();
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> ys = y.template cast<Scalar>();

  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (Eigen::Index start = 0; start < n; start += hp.batch_size) {
      const Eigen::Index count = std::min<Eigen::Index>(hp.batch_size, n - start);
      const std::vector<Eigen::Index> rows(order.begin() + start, order.begin() + start + count);
      const typename Network<Scalar>::Matrix bx = xs(rows, Eigen::all);
      const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> by = ys(rows);

      DropoutMasks<Scalar> masks;
      const DropoutMasks<Scalar>* mask_ptr = nullptr;
      if (hp.dropout > 0.0) {
        masks = draw_masks(net, count, hp.dropout, rng);
        mask_ptr = &masks;
      }
      const auto cache = forward_cached<Scalar>(net, bx, mask_ptr, hp.dropout);
      const double batch = static_cast<double>(batch_loss<Scalar>(cache.output, by, output));
      if (!std::isfinite(batch)) {
        throw TrainingDiverged("training loss became non-finite at epoch " + std::to_string(epoch + 1));
      }
      epoch_loss += batch * static_cast<double>(count);
      adam.step(net, backward(net, cache, bx, by, mask_ptr, hp.dropout));
    }
    result.loss_log.push_back(epoch_loss / static_cast<double>(n));
  }
  return result;
}

}  // namespace hybridscreen
