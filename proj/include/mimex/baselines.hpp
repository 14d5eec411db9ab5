#pragma once

#include "mimex/nn.hpp"
#include "mimex/optim.hpp"
#include "mimex/tensor.hpp"

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

namespace mimex {

namespace detail {
template <class Scalar>
Mat<Scalar> to_row(const Eigen::VectorXf& v) {
  Mat<Scalar> m(1, v.size());
  for (Eigen::Index j = 0; j < v.size(); ++j) m(0, j) = static_cast<Scalar>(v(j));
  return m;
}
}  // namespace detail

// Random network distillation: reward is the predictor's squared error
// against a frozen randomly initialized target.
template <class Scalar>
class RndNets {
 public:
  RndNets(int obs_dim, int feature_dim, int hidden, Rng& rng,
          Scalar lr = Scalar(1e-3))
      : opt_(lr) {
    target_ = Mlp<Scalar>({obs_dim, hidden, feature_dim}, rng, target_params_,
                          "target");
    predictor_ = Mlp<Scalar>({obs_dim, hidden, hidden, feature_dim}, rng,
                             predictor_params_, "predictor");
  }

  double reward(const Eigen::VectorXf& obs) const {
    NoGradGuard no_grad;
    Tensor<Scalar> x(detail::to_row<Scalar>(obs));
    Mat<Scalar> diff = predictor_(x).value() - target_(x).value();
    return static_cast<double>(diff.array().square().sum());
  }

  // One predictor step toward the frozen target on a batch of observations.
  double update(const std::vector<Eigen::VectorXf>& batch) {
    if (batch.empty()) throw std::invalid_argument("rnd update: empty batch");
    Mat<Scalar> xs(static_cast<Eigen::Index>(batch.size()), batch[0].size());
    for (std::size_t i = 0; i < batch.size(); ++i)
      xs.row(static_cast<Eigen::Index>(i)) =
          detail::to_row<Scalar>(batch[i]).row(0);
    Tensor<Scalar> x(std::move(xs));
    Mat<Scalar> target_out;
    {
      NoGradGuard no_grad;
      target_out = target_(x).value();
    }
    zero_grads(predictor_params_.tensors);
    Tensor<Scalar> loss = mse(predictor_(x), Tensor<Scalar>(target_out));
    const double l = static_cast<double>(loss.item());
    backward(loss);
    opt_.step(predictor_params_.tensors);
    zero_grads(predictor_params_.tensors);
    return l;
  }

  Mat<Scalar> target_output(const Eigen::VectorXf& obs) const {
    NoGradGuard no_grad;
    return target_(Tensor<Scalar>(detail::to_row<Scalar>(obs))).value();
  }

  const ParamList<Scalar>& target_params() const { return target_params_; }

 private:
  ParamList<Scalar> target_params_;     // frozen after construction
  ParamList<Scalar> predictor_params_;
  Mlp<Scalar> target_, predictor_;
  Adam<Scalar> opt_;
};

// Intrinsic curiosity module: forward-model error in a feature space trained
// by inverse dynamics. Forward-model gradients never reach the encoder.
template <class Scalar>
class IcmNets {
 public:
  IcmNets(int obs_dim, int feature_dim, int hidden, bool discrete_actions,
          int action_dim, Rng& rng, Scalar lr = Scalar(1e-3))
      : discrete_(discrete_actions), action_dim_(action_dim), opt_(lr) {
    encoder_ = Mlp<Scalar>({obs_dim, hidden, feature_dim}, rng, params_, "phi");
    inverse_ = Mlp<Scalar>({2 * feature_dim, hidden, action_dim}, rng, params_,
                           "inverse");
    forward_ = Mlp<Scalar>({feature_dim + action_dim, hidden, feature_dim}, rng,
                           params_, "forward");
  }

  double reward(const Eigen::VectorXf& s, const Eigen::VectorXf& a,
                const Eigen::VectorXf& s_next) const {
    NoGradGuard no_grad;
    Tensor<Scalar> z = encoder_(Tensor<Scalar>(detail::to_row<Scalar>(s)));
    Tensor<Scalar> zn = encoder_(Tensor<Scalar>(detail::to_row<Scalar>(s_next)));
    std::vector<Tensor<Scalar>> in{z, Tensor<Scalar>(action_row(a))};
    Mat<Scalar> diff = forward_(concat_cols(in)).value() - zn.value();
    return static_cast<double>(diff.array().square().sum());
  }

  struct UpdateStats {
    double inverse_loss = 0;
    double forward_loss = 0;
  };

  UpdateStats update(const std::vector<Eigen::VectorXf>& s,
                     const std::vector<Eigen::VectorXf>& a,
                     const std::vector<Eigen::VectorXf>& s_next) {
    if (s.empty() || s.size() != a.size() || s.size() != s_next.size())
      throw std::invalid_argument("icm update: bad batch");
    const Eigen::Index B = static_cast<Eigen::Index>(s.size());
    Mat<Scalar> xs(B, s[0].size()), xn(B, s[0].size()), act(B, action_dim_);
    for (Eigen::Index i = 0; i < B; ++i) {
      xs.row(i) = detail::to_row<Scalar>(s[static_cast<std::size_t>(i)]).row(0);
      xn.row(i) = detail::to_row<Scalar>(s_next[static_cast<std::size_t>(i)]).row(0);
      act.row(i) = action_row(a[static_cast<std::size_t>(i)]).row(0);
    }
    zero_grads(params_.tensors);

    Tensor<Scalar> z = encoder_(Tensor<Scalar>(std::move(xs)));
    Tensor<Scalar> zn = encoder_(Tensor<Scalar>(std::move(xn)));

    // inverse dynamics trains the encoder
    std::vector<Tensor<Scalar>> pair{z, zn};
    Tensor<Scalar> pred_a = inverse_(concat_cols(pair));
    Tensor<Scalar> inv_loss;
    if (discrete_) {
      // cross entropy against the taken action index (act rows are one-hot)
      inv_loss = scale(sum_all(mul_const(log_softmax(pred_a), Mat<Scalar>(act))),
                       Scalar(-1) / static_cast<Scalar>(B));
    } else {
      inv_loss = mse(pred_a, Tensor<Scalar>(act));
    }

    // forward model sees detached features on both sides
    std::vector<Tensor<Scalar>> fin{z.detach(), Tensor<Scalar>(act)};
    Tensor<Scalar> fwd_loss = mse(forward_(concat_cols(fin)), zn.detach());

    Tensor<Scalar> loss = add(inv_loss, fwd_loss);
    UpdateStats stats{static_cast<double>(inv_loss.item()),
                      static_cast<double>(fwd_loss.item())};
    backward(loss);
    opt_.step(params_.tensors);
    zero_grads(params_.tensors);
    return stats;
  }

  // inverse-model action prediction accuracy on a discrete batch
  double inverse_accuracy(const std::vector<Eigen::VectorXf>& s,
                          const std::vector<Eigen::VectorXf>& a,
                          const std::vector<Eigen::VectorXf>& s_next) const {
    NoGradGuard no_grad;
    int correct = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      Tensor<Scalar> z = encoder_(Tensor<Scalar>(detail::to_row<Scalar>(s[i])));
      Tensor<Scalar> zn = encoder_(Tensor<Scalar>(detail::to_row<Scalar>(s_next[i])));
      std::vector<Tensor<Scalar>> pair{z, zn};
      Mat<Scalar> logits = inverse_(concat_cols(pair)).value();
      Eigen::Index best = 0;
      logits.row(0).maxCoeff(&best);
      if (best == static_cast<Eigen::Index>(a[i](0))) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(s.size());
  }

 private:
  Mat<Scalar> action_row(const Eigen::VectorXf& a) const {
    Mat<Scalar> row = Mat<Scalar>::Zero(1, action_dim_);
    if (discrete_) {
      const int idx = static_cast<int>(a(0));
      if (idx < 0 || idx >= action_dim_)
        throw std::invalid_argument("icm: action index out of range");
      row(0, idx) = Scalar(1);
    } else {
      for (Eigen::Index j = 0; j < a.size(); ++j) row(0, j) = static_cast<Scalar>(a(j));
    }
    return row;
  }

  bool discrete_;
  int action_dim_;
  ParamList<Scalar> params_;
  Mlp<Scalar> encoder_, inverse_, forward_;
  Adam<Scalar> opt_;
};

// Undirected exploration: Gaussian action noise (continuous) with clamping,
// or epsilon-greedy resampling (discrete).
inline Eigen::VectorXf action_noise(const Eigen::VectorXf& action, double scale,
                                    float low, float high, Rng& rng) {
  if (scale < 0) throw std::invalid_argument("action_noise: scale must be >= 0");
  Eigen::VectorXf out = action;
  for (Eigen::Index j = 0; j < out.size(); ++j) {
    out(j) = static_cast<float>(out(j) + scale * rng.normal());
    out(j) = std::min(high, std::max(low, out(j)));
  }
  return out;
}

inline int action_noise_discrete(int action, int num_actions, double epsilon,
                                 Rng& rng) {
  if (epsilon < 0) throw std::invalid_argument("action_noise: scale must be >= 0");
  if (rng.uniform() < epsilon)
    return static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(num_actions)));
  return action;
}

}  // namespace mimex
