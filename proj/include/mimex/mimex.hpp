#pragma once

#include "mimex/masking.hpp"
#include "mimex/optim.hpp"
#include "mimex/transformer.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace mimex {

// One environment step as seen by the exploration machinery.
struct TransitionRecord {
  Eigen::VectorXf observation;
  Eigen::VectorXf action;  // one element for discrete actions
  double extrinsic_reward = 0.0;
  bool done = false;
};

struct MimexConfig {
  int window_length = 5;  // T
  double beta = 0.05;
  MaskSpec mask_spec;
  double learning_rate = 1e-4;
  int batch_size = 512;
  bool detach_embeddings = true;
  bool normalize_reward = false;  // optional running-std normalizer, off by default

  void validate() const {
    if (window_length < 1)
      throw std::invalid_argument("mimex window_length must be >= 1");
    if (beta < 0.0) throw std::invalid_argument("mimex beta must be >= 0");
    if (learning_rate <= 0.0)
      throw std::invalid_argument("mimex learning_rate must be > 0");
    if (batch_size < 1) throw std::invalid_argument("mimex batch_size must be >= 1");
    if (!detach_embeddings)
      throw std::invalid_argument(
          "mimex detach_embeddings=false is not supported: reward gradients "
          "never reach the policy encoder");
    mask_spec.validate();
  }
};

// Length-T sequence of embeddings ending at end_step; missing pre-episode
// slots are zero rows flagged in a contiguous prefix.
template <class Scalar>
struct EmbeddingWindow {
  Tensor<Scalar> embeddings;   // T x D
  std::vector<bool> pad_flags;  // true = zero-padded slot
  int end_step = 0;
};

// Builds the window (z_{t-T+1}, ..., z_t). The encoder maps an observation to
// a 1xD embedding row; embeddings are plain values, detached from any policy
// gradient graph. Windows never cross episode boundaries: a done flag before
// t re-pads the prefix with zeros.
template <class Scalar, class Encoder>
EmbeddingWindow<Scalar> build_window(const std::vector<TransitionRecord>& trajectory,
                                     int t, int T, Encoder&& encoder) {
  if (t < 0 || t >= static_cast<int>(trajectory.size()))
    throw std::invalid_argument("build_window: t out of range");
  if (T < 1) throw std::invalid_argument("build_window: T must be >= 1");

  int first = t - T + 1;
  // step after the most recent episode boundary strictly before t
  for (int k = t - 1; k >= first && k >= 0; --k) {
    if (trajectory[static_cast<std::size_t>(k)].done) {
      first = k + 1;
      break;
    }
  }

  EmbeddingWindow<Scalar> w;
  w.end_step = t;
  w.pad_flags.assign(static_cast<std::size_t>(T), false);
  Mat<Scalar> z;
  for (int i = 0; i < T; ++i) {
    const int k = t - T + 1 + i;
    if (k < first || k < 0) {
      w.pad_flags[static_cast<std::size_t>(i)] = true;
      continue;
    }
    auto row = encoder(trajectory[static_cast<std::size_t>(k)].observation);
    if (z.size() == 0) z = Mat<Scalar>::Zero(T, row.size());
    for (Eigen::Index j = 0; j < row.size(); ++j)
      z(i, j) = static_cast<Scalar>(row(j));
  }
  if (z.size() == 0) {
    // fully padded window cannot happen: slot t itself is never padded
    throw std::logic_error("build_window: empty window");
  }
  w.embeddings = Tensor<Scalar>(std::move(z));
  return w;
}

// Convenience overload over precomputed embeddings (one row per step).
template <class Scalar>
EmbeddingWindow<Scalar> build_window_from_embeddings(
    const std::vector<Eigen::VectorXf>& embeddings, const std::vector<bool>& dones,
    int t, int T) {
  if (t < 0 || t >= static_cast<int>(embeddings.size()))
    throw std::invalid_argument("build_window: t out of range");
  int first = t - T + 1;
  for (int k = t - 1; k >= first && k >= 0; --k) {
    if (dones[static_cast<std::size_t>(k)]) {
      first = k + 1;
      break;
    }
  }
  EmbeddingWindow<Scalar> w;
  w.end_step = t;
  w.pad_flags.assign(static_cast<std::size_t>(T), false);
  const Eigen::Index D = embeddings[static_cast<std::size_t>(t)].size();
  Mat<Scalar> z = Mat<Scalar>::Zero(T, D);
  for (int i = 0; i < T; ++i) {
    const int k = t - T + 1 + i;
    if (k < first || k < 0) {
      w.pad_flags[static_cast<std::size_t>(i)] = true;
      continue;
    }
    for (Eigen::Index j = 0; j < D; ++j)
      z(i, j) = static_cast<Scalar>(embeddings[static_cast<std::size_t>(k)](j));
  }
  w.embeddings = Tensor<Scalar>(std::move(z));
  return w;
}

// Masked-prediction intrinsic reward: average reconstruction loss over M
// fresh masks. Pure query, no parameter update, no graph.
template <class Scalar>
double intrinsic_reward(const MaskedSeqAutoencoder<Scalar>& model,
                        const EmbeddingWindow<Scalar>& window,
                        const MaskSpec& spec, Rng& rng) {
  NoGradGuard no_grad;
  const int T = static_cast<int>(window.embeddings.rows());
  const int D = static_cast<int>(window.embeddings.cols());
  double total = 0.0;
  for (int k = 0; k < spec.num_samples; ++k) {
    Mask mask = sample_mask(spec, T, D, rng);
    total += static_cast<double>(
        model.reconstruction_loss(window.embeddings, mask).item());
  }
  return total / spec.num_samples;
}

// One online training pass: a fresh mask per window, batch-averaged loss,
// one optimizer step. Returns the pre-step loss.
template <class Scalar>
double mimex_update(MaskedSeqAutoencoder<Scalar>& model, Adam<Scalar>& opt,
                    const std::vector<EmbeddingWindow<Scalar>>& batch,
                    const MaskSpec& spec, Rng& rng) {
  if (batch.empty()) throw std::invalid_argument("mimex_update: empty batch");
  zero_grads(model.params().tensors);
  Tensor<Scalar> loss;
  for (const auto& w : batch) {
    const int T = static_cast<int>(w.embeddings.rows());
    const int D = static_cast<int>(w.embeddings.cols());
    Mask mask = sample_mask(spec, T, D, rng);
    Tensor<Scalar> l = model.reconstruction_loss(w.embeddings, mask);
    loss = loss.defined() ? add(loss, l) : l;
  }
  loss = scale(loss, Scalar(1) / static_cast<Scalar>(batch.size()));
  const double pre_step = static_cast<double>(loss.item());
  backward(loss);
  opt.step(model.params().tensors);
  zero_grads(model.params().tensors);
  return pre_step;
}

inline double mix_rewards(double extrinsic, double intrinsic, double beta) {
  return extrinsic + beta * intrinsic;
}

// Optional running normalizer for intrinsic rewards: centers by the running
// mean and scales by the running standard deviation. Centering matters in
// episodic tasks where success ends the episode early: an uncentered positive
// per-step bonus pays the agent for surviving, which can outweigh a terminal
// extrinsic reward. Centered, ordinary states earn ~0 and only
// above-average-novelty states earn a positive bonus.
class RunningStdNormalizer {
 public:
  double normalize(double x) {
    ++count_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(count_);
    m2_ += delta * (x - mean_);
    const double sd = count_ > 1 ? std::sqrt(m2_ / static_cast<double>(count_ - 1)) : 1.0;
    const double z = sd > 1e-8 ? (x - mean_) / sd : 0.0;
    // Clip rare spikes (e.g. a batch of model loss blowing up on freshly
    // visited states) so a single outlier cannot swamp the extrinsic signal.
    return std::clamp(z, -kClip, kClip);
  }

  static constexpr double kClip = 5.0;

 private:
  long count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

}  // namespace mimex
