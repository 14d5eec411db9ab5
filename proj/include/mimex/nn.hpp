#pragma once

#include "mimex/rng.hpp"
#include "mimex/tensor.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace mimex {

// Named parameter registry. Registration order defines checkpoint order.
template <class Scalar>
struct ParamList {
  std::vector<std::string> names;
  std::vector<Tensor<Scalar>> tensors;

  Tensor<Scalar>& add(const std::string& name, Tensor<Scalar> t) {
    names.push_back(name);
    tensors.push_back(std::move(t));
    return tensors.back();
  }

  long total_size() const {
    long n = 0;
    for (const auto& t : tensors) n += static_cast<long>(t.size());
    return n;
  }
};

// Glorot-uniform init: +-sqrt(6 / (fan_in + fan_out)).
template <class Scalar>
Mat<Scalar> glorot_uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Mat<Scalar> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i)
    m(i) = static_cast<Scalar>(rng.uniform(-bound, bound));
  return m;
}

template <class Scalar>
struct Linear {
  Tensor<Scalar> weight;  // in x out
  Tensor<Scalar> bias;    // 1 x out

  Linear() = default;
  Linear(Eigen::Index in, Eigen::Index out, Rng& rng, ParamList<Scalar>& params,
         const std::string& name) {
    weight = params.add(name + ".weight",
                        Tensor<Scalar>(glorot_uniform<Scalar>(in, out, rng), true));
    bias = params.add(name + ".bias",
                      Tensor<Scalar>(Mat<Scalar>::Zero(1, out), true));
  }

  Tensor<Scalar> operator()(const Tensor<Scalar>& x) const {
    return add_rowvec(matmul(x, weight), bias);
  }
};

template <class Scalar>
struct LayerNorm {
  Tensor<Scalar> gain;  // 1 x d
  Tensor<Scalar> bias;  // 1 x d
  Scalar eps = Scalar(1e-5);

  LayerNorm() = default;
  LayerNorm(Eigen::Index d, ParamList<Scalar>& params, const std::string& name) {
    gain = params.add(name + ".gain",
                      Tensor<Scalar>(Mat<Scalar>::Ones(1, d), true));
    bias = params.add(name + ".bias",
                      Tensor<Scalar>(Mat<Scalar>::Zero(1, d), true));
  }

  Tensor<Scalar> operator()(const Tensor<Scalar>& x) const {
    return layer_norm(x, gain, bias, eps);
  }
};

// Plain feed-forward net with GELU between layers. Used by the policy,
// value head, and the RND/ICM baselines.
template <class Scalar>
struct Mlp {
  std::vector<Linear<Scalar>> layers;

  Mlp() = default;
  Mlp(const std::vector<Eigen::Index>& dims, Rng& rng, ParamList<Scalar>& params,
      const std::string& name) {
    for (std::size_t i = 0; i + 1 < dims.size(); ++i)
      layers.emplace_back(dims[i], dims[i + 1], rng, params,
                          name + ".fc" + std::to_string(i));
  }

  Tensor<Scalar> operator()(Tensor<Scalar> x) const {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      x = layers[i](x);
      if (i + 1 < layers.size()) x = gelu(x);
    }
    return x;
  }
};

}  // namespace mimex
