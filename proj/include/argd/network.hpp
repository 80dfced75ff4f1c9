#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "argd/matrix.hpp"
#include "argd/rng.hpp"

namespace argd::net {

enum class Activation { identity, relu, leaky_relu };
enum class LossKind { mse, cross_entropy };

/// Bias-free MLP: layer j maps d_{j-1} -> d_j through W_j and the hidden
/// activation; the final layer stays linear (logits for cross-entropy).
struct NetworkSpec {
  std::vector<std::size_t> layer_dims;  // d_0, d_1, ..., d_L
  Activation activation = Activation::relu;
  double leaky_slope = 0.01;
  LossKind loss = LossKind::mse;
  std::uint64_t seed = 0;

  std::size_t depth() const { return layer_dims.empty() ? 0 : layer_dims.size() - 1; }

  void validate() const {
    if (layer_dims.size() < 2) {
      throw Error(ErrorCode::invalid_argument, "network needs at least one layer");
    }
    for (std::size_t d : layer_dims) {
      if (d < 1) throw Error(ErrorCode::invalid_argument, "layer dimensions must be >= 1");
    }
    if (activation == Activation::leaky_relu &&
        !(leaky_slope >= 0.0 && leaky_slope < 1.0)) {
      throw Error(ErrorCode::invalid_argument, "leaky slope must lie in [0,1)");
    }
  }
};

/// Column-major samples: inputs d0 x N, targets dL x N (one-hot columns for
/// cross-entropy).
struct Batch {
  Matrix inputs;
  Matrix targets;
  std::size_t size = 0;
};

/// Scaled-Gaussian initialization, std 1/sqrt(fan_in), one stream per layer.
inline std::vector<Matrix> init_weights(const NetworkSpec& spec) {
  spec.validate();
  std::vector<Matrix> weights;
  weights.reserve(spec.depth());
  for (std::size_t j = 1; j < spec.layer_dims.size(); ++j) {
    const std::size_t fan_in = spec.layer_dims[j - 1];
    Matrix w = gaussian_matrix(spec.layer_dims[j], fan_in, mix_seed(spec.seed, j));
    weights.push_back(scale(w, 1.0 / std::sqrt(static_cast<double>(fan_in))));
  }
  return weights;
}

namespace detail_net {

inline double act_value(Activation a, double slope, double z) {
  switch (a) {
    case Activation::identity: return z;
    case Activation::relu: return z > 0.0 ? z : 0.0;
    case Activation::leaky_relu: return z > 0.0 ? z : slope * z;
  }
  return z;
}

inline double act_deriv(Activation a, double slope, double z) {
  switch (a) {
    case Activation::identity: return 1.0;
    case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
    case Activation::leaky_relu: return z > 0.0 ? 1.0 : slope;
  }
  return 1.0;
}

inline void check_weight_shapes(const NetworkSpec& spec, const std::vector<Matrix>& weights) {
  if (weights.size() != spec.depth()) {
    throw Error(ErrorCode::invalid_argument,
                "expected " + std::to_string(spec.depth()) + " weight matrices, got " +
                    std::to_string(weights.size()));
  }
  for (std::size_t j = 0; j < weights.size(); ++j) {
    if (weights[j].rows() != spec.layer_dims[j + 1] ||
        weights[j].cols() != spec.layer_dims[j]) {
      throw Error(ErrorCode::invalid_argument,
                  "layer " + std::to_string(j + 1) + " weight shape mismatch");
    }
  }
}

/// Column-wise softmax with max subtraction.
inline Matrix softmax_cols(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (std::size_t j = 0; j < logits.cols(); ++j) {
    double zmax = logits(0, j);
    for (std::size_t i = 1; i < logits.rows(); ++i) zmax = std::max(zmax, logits(i, j));
    double denom = 0.0;
    for (std::size_t i = 0; i < logits.rows(); ++i) {
      p(i, j) = std::exp(logits(i, j) - zmax);
      denom += p(i, j);
    }
    for (std::size_t i = 0; i < logits.rows(); ++i) p(i, j) /= denom;
  }
  return p;
}

}  // namespace detail_net

/// Everything backward needs: per-layer pre/post activations plus a copy of
/// the weights and targets the forward pass saw, so a stale cache is
/// detected exactly.
struct ForwardCache {
  double loss = 0.0;
  std::vector<Matrix> pre;   // pre[j] = z_{j+1} = W_{j+1} * post[j]
  std::vector<Matrix> post;  // post[0] = inputs, post[j] = activation(pre[j-1])
  std::vector<Matrix> weights_snapshot;
  Matrix targets;
};

inline ForwardCache forward(const NetworkSpec& spec, const std::vector<Matrix>& weights,
                            const Batch& batch) {
  spec.validate();
  detail_net::check_weight_shapes(spec, weights);
  if (batch.inputs.rows() != spec.layer_dims.front()) {
    throw Error(ErrorCode::invalid_argument, "batch input dimension mismatch at layer 0");
  }
  if (batch.targets.rows() != spec.layer_dims.back() ||
      batch.targets.cols() != batch.inputs.cols()) {
    throw Error(ErrorCode::invalid_argument, "batch target shape mismatch at output layer");
  }
  const std::size_t n = batch.inputs.cols();
  const std::size_t depth = spec.depth();

  ForwardCache cache;
  cache.post.push_back(batch.inputs);
  for (std::size_t j = 0; j < depth; ++j) {
    Matrix z = matmul(weights[j], cache.post.back());
    if (j + 1 < depth) {
      Matrix a(z.rows(), z.cols());
      for (std::size_t i = 0; i < z.size(); ++i) {
        a.data()[i] = detail_net::act_value(spec.activation, spec.leaky_slope, z.data()[i]);
      }
      cache.pre.push_back(std::move(z));
      cache.post.push_back(std::move(a));
    } else {
      cache.pre.push_back(z);
      cache.post.push_back(std::move(z));  // output layer stays linear
    }
  }

  const Matrix& out = cache.post.back();
  double loss = 0.0;
  if (spec.loss == LossKind::mse) {
    const Matrix diff = sub(out, batch.targets);
    const double f = fro_norm(diff);
    loss = f * f / static_cast<double>(n);
  } else {
    const Matrix p = detail_net::softmax_cols(out);
    for (std::size_t j = 0; j < p.cols(); ++j) {
      for (std::size_t i = 0; i < p.rows(); ++i) {
        if (batch.targets(i, j) > 0.0) {
          loss -= batch.targets(i, j) * std::log(std::max(p(i, j), 1e-300));
        }
      }
    }
    loss /= static_cast<double>(n);
  }
  cache.loss = loss;
  cache.weights_snapshot = weights;
  cache.targets = batch.targets;
  return cache;
}

enum class GradReduction { mean, sum };

/// Exact gradients of the batch loss with respect to every weight matrix.
/// `mean` divides by the batch size; `sum` leaves the raw per-sample sum.
inline std::vector<Matrix> backward(const NetworkSpec& spec, const std::vector<Matrix>& weights,
                                    const ForwardCache& cache,
                                    GradReduction reduction = GradReduction::mean) {
  spec.validate();
  detail_net::check_weight_shapes(spec, weights);
  if (cache.weights_snapshot.size() != weights.size()) {
    throw Error(ErrorCode::invalid_argument, "backward: cache does not match this network");
  }
  for (std::size_t j = 0; j < weights.size(); ++j) {
    if (!(weights[j] == cache.weights_snapshot[j])) {
      throw Error(ErrorCode::invalid_argument,
                  "backward: stale cache, weights changed since forward (layer " +
                      std::to_string(j + 1) + ")");
    }
  }
  const std::size_t depth = spec.depth();
  const std::size_t n = cache.post.front().cols();
  const double norm = reduction == GradReduction::mean ? 1.0 / static_cast<double>(n) : 1.0;

  // Output-layer sensitivity.
  Matrix delta;
  if (spec.loss == LossKind::mse) {
    delta = scale(sub(cache.post.back(), cache.targets), 2.0 * norm);
  } else {
    delta = scale(sub(detail_net::softmax_cols(cache.post.back()), cache.targets), norm);
  }

  std::vector<Matrix> grads(depth);
  for (std::size_t j = depth; j-- > 0;) {
    grads[j] = matmul(delta, transpose(cache.post[j]));
    if (j > 0) {
      Matrix back = matmul(transpose(weights[j]), delta);
      const Matrix& z = cache.pre[j - 1];
      for (std::size_t i = 0; i < back.size(); ++i) {
        back.data()[i] *= detail_net::act_deriv(spec.activation, spec.leaky_slope, z.data()[i]);
      }
      delta = std::move(back);
    }
  }
  return grads;
}

/// Loss and gradients in one call, for training loops.
struct Evaluation {
  double loss = 0.0;
  std::vector<Matrix> grads;
};

inline Evaluation evaluate(const NetworkSpec& spec, const std::vector<Matrix>& weights,
                           const Batch& batch, GradReduction reduction = GradReduction::mean) {
  ForwardCache cache = forward(spec, weights, batch);
  Evaluation ev;
  ev.loss = cache.loss;
  ev.grads = backward(spec, weights, cache, reduction);
  return ev;
}

// ---- Synthetic data ---------------------------------------------------------

struct LowRankRegression {
  std::size_t target_rank = 1;
  double noise_std = 0.0;
};

struct Classification {
  std::size_t classes = 2;
  double cluster_spread = 0.3;
};

using SyntheticKind = std::variant<LowRankRegression, Classification>;

struct SyntheticData {
  Batch batch;
  std::optional<Matrix> true_weights;  // the rank-r* map behind a regression batch
};

/// Deterministic synthetic batches. Regression draws Gaussian inputs and
/// targets Y = W* X + noise with a rank-r* W*; classification draws
/// Gaussian clusters with one-hot labels.
inline SyntheticData make_synthetic(const SyntheticKind& kind, std::size_t in_dim,
                                    std::size_t out_dim, std::size_t n, std::uint64_t seed) {
  if (in_dim < 1 || out_dim < 1 || n < 1) {
    throw Error(ErrorCode::invalid_argument, "make_synthetic: dimensions must be >= 1");
  }
  SyntheticData data;
  if (const auto* reg = std::get_if<LowRankRegression>(&kind)) {
    if (reg->target_rank < 1 || reg->target_rank > std::min(in_dim, out_dim)) {
      throw Error(ErrorCode::invalid_argument,
                  "make_synthetic: target rank outside [1, min(dims)]");
    }
    const Matrix left = gaussian_matrix(out_dim, reg->target_rank, mix_seed(seed, 1));
    const Matrix right = gaussian_matrix(reg->target_rank, in_dim, mix_seed(seed, 2));
    const Matrix w_true =
        scale(matmul(left, right), 1.0 / std::sqrt(static_cast<double>(reg->target_rank)));
    data.batch.inputs = gaussian_matrix(in_dim, n, mix_seed(seed, 3));
    Matrix y = matmul(w_true, data.batch.inputs);
    if (reg->noise_std > 0.0) {
      y = add(y, scale(gaussian_matrix(out_dim, n, mix_seed(seed, 4)), reg->noise_std));
    }
    data.batch.targets = std::move(y);
    data.true_weights = w_true;
  } else {
    const auto& cls = std::get<Classification>(kind);
    if (cls.classes < 2 || cls.classes != out_dim) {
      throw Error(ErrorCode::invalid_argument,
                  "make_synthetic: classes must equal out_dim and be >= 2");
    }
    const Matrix means = gaussian_matrix(in_dim, cls.classes, mix_seed(seed, 1));
    const Matrix jitter = gaussian_matrix(in_dim, n, mix_seed(seed, 2));
    data.batch.inputs = Matrix(in_dim, n);
    data.batch.targets = Matrix(out_dim, n);
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t label = j % cls.classes;
      for (std::size_t i = 0; i < in_dim; ++i) {
        data.batch.inputs(i, j) = means(i, label) + cls.cluster_spread * jitter(i, j);
      }
      data.batch.targets(label, j) = 1.0;
    }
  }
  data.batch.size = n;
  return data;
}

}  // namespace argd::net
