#pragma once

#include "mimex/baselines.hpp"
#include "mimex/envs.hpp"
#include "mimex/mimex.hpp"
#include "mimex/nn.hpp"
#include "mimex/optim.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace mimex {

struct PpoConfig {
  int rollout_horizon = 512;
  int epochs = 4;
  int minibatch_size = 64;
  double clip_eps = 0.2;
  double gamma = 0.99;
  double lambda = 0.95;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  double learning_rate = 3e-4;

  void validate() const {
    if (clip_eps <= 0) throw std::invalid_argument("ppo clip_eps must be > 0");
    if (gamma < 0 || gamma > 1) throw std::invalid_argument("ppo gamma must be in [0,1]");
    if (lambda < 0 || lambda > 1) throw std::invalid_argument("ppo lambda must be in [0,1]");
    if (rollout_horizon < 1 || epochs < 1 || minibatch_size < 1)
      throw std::invalid_argument("ppo horizon/epochs/minibatch must be >= 1");
    if (learning_rate <= 0) throw std::invalid_argument("ppo learning_rate must be > 0");
  }
};

// Fixed per-env affine observation normalization, estimated once from a
// random-policy warmup and frozen thereafter.
struct ObsNormalizer {
  Eigen::VectorXf mean;
  Eigen::VectorXf inv_std;

  Eigen::VectorXf operator()(const Eigen::VectorXf& obs) const {
    if (mean.size() == 0) return obs;  // identity until fitted
    return (obs - mean).cwiseProduct(inv_std);
  }
};

inline Eigen::VectorXf random_action(const ActionSpace& space, Rng& rng) {
  if (space.discrete) {
    Eigen::VectorXf a(1);
    a << static_cast<float>(rng.uniform_int(static_cast<std::uint64_t>(space.count)));
    return a;
  }
  Eigen::VectorXf a(space.dim);
  for (int j = 0; j < space.dim; ++j)
    a(j) = static_cast<float>(rng.uniform(space.low, space.high));
  return a;
}

inline ObsNormalizer warmup_normalizer(Env& env, int steps, Rng& rng,
                                       float min_std = 0.01f) {
  const int d = env.obs_dim();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd sumsq = Eigen::VectorXd::Zero(d);
  std::uint64_t ep = 0;
  Eigen::VectorXf obs = env.reset(ep);
  for (int i = 0; i < steps; ++i) {
    sum += obs.cast<double>();
    sumsq += obs.cast<double>().cwiseAbs2();
    StepResult r = env.step(random_action(env.action_space(), rng));
    obs = r.done ? env.reset(++ep) : r.obs;
  }
  ObsNormalizer n;
  n.mean = (sum / steps).cast<float>();
  Eigen::VectorXd var = sumsq / steps - (sum / steps).cwiseAbs2();
  n.inv_std = var.cwiseMax(0.0).cwiseSqrt().cwiseMax(static_cast<double>(min_std))
                  .cwiseInverse().cast<float>();
  return n;
}

// Actor-critic over a shared observation encoder. The encoder's output is the
// embedding stream consumed by the exploration windows.
template <class Scalar>
class PolicyNet {
 public:
  struct ActOut {
    Eigen::VectorXf action;
    double log_prob = 0;
    double value = 0;
  };

  struct EvalOut {
    Tensor<Scalar> log_probs;  // B x 1
    Tensor<Scalar> entropy;    // 1 x 1, mean per sample
    Tensor<Scalar> values;     // B x 1
  };

  PolicyNet() = default;
  PolicyNet(int obs_dim, int hidden, int embed_dim, const ActionSpace& space,
            Rng& rng)
      : space_(space), embed_dim_(embed_dim) {
    encoder_ = Mlp<Scalar>({obs_dim, hidden, embed_dim}, rng, params_, "encoder");
    const int head_out = space.discrete ? space.count : space.dim;
    actor_ = Mlp<Scalar>({embed_dim, hidden, head_out}, rng, params_, "actor");
    // zero-init the final actor layer: the initial policy is exactly uniform
    // (or zero-mean), so early evaluations reflect learning, not init luck
    actor_.layers.back().weight.value().setZero();
    critic_ = Mlp<Scalar>({embed_dim, hidden, 1}, rng, params_, "critic");
    // zero-init the value head as well: with no reward signal yet, values,
    // advantages and policy gradients all stay exactly zero instead of
    // amplifying critic init noise through advantage normalization
    critic_.layers.back().weight.value().setZero();
    if (!space.discrete)
      log_std_ = params_.add(
          "log_std",
          Tensor<Scalar>(Mat<Scalar>::Constant(1, space.dim, Scalar(-0.5)), true));
  }

  int embed_dim() const { return embed_dim_; }
  const ActionSpace& space() const { return space_; }
  ParamList<Scalar>& params() { return params_; }
  const ParamList<Scalar>& params() const { return params_; }

  // Embedding of one observation, detached from any graph.
  Eigen::VectorXf embed(const Eigen::VectorXf& obs) const {
    NoGradGuard no_grad;
    Mat<Scalar> z = encoder_(Tensor<Scalar>(to_row(obs))).value();
    Eigen::VectorXf out(z.cols());
    for (Eigen::Index j = 0; j < z.cols(); ++j)
      out(j) = static_cast<float>(z(0, j));
    return out;
  }

  ActOut act(const Eigen::VectorXf& obs, Rng& rng) const {
    NoGradGuard no_grad;
    Tensor<Scalar> z = encoder_(Tensor<Scalar>(to_row(obs)));
    Mat<Scalar> head = actor_(z).value();
    ActOut out;
    out.value = static_cast<double>(critic_(z).value()(0, 0));
    if (space_.discrete) {
      const Eigen::Index A = head.cols();
      Mat<Scalar> lp = log_probs_row(head);
      double u = rng.uniform();
      Eigen::Index a = A - 1;
      double cum = 0;
      for (Eigen::Index j = 0; j < A; ++j) {
        cum += std::exp(static_cast<double>(lp(0, j)));
        if (u < cum) {
          a = j;
          break;
        }
      }
      out.action = Eigen::VectorXf(1);
      out.action(0) = static_cast<float>(a);
      out.log_prob = static_cast<double>(lp(0, a));
    } else {
      out.action = Eigen::VectorXf(space_.dim);
      for (int j = 0; j < space_.dim; ++j) {
        const double sd = std::exp(static_cast<double>(log_std_.value()(0, j)));
        double a = static_cast<double>(head(0, j)) + sd * rng.normal();
        out.action(j) = std::clamp(static_cast<float>(a), space_.low, space_.high);
      }
      out.log_prob = gaussian_log_prob(head, out.action);
    }
    return out;
  }

  // Log-prob and value of a given action (used after external perturbation).
  ActOut score(const Eigen::VectorXf& obs, const Eigen::VectorXf& action) const {
    NoGradGuard no_grad;
    Tensor<Scalar> z = encoder_(Tensor<Scalar>(to_row(obs)));
    Mat<Scalar> head = actor_(z).value();
    ActOut out;
    out.action = action;
    out.value = static_cast<double>(critic_(z).value()(0, 0));
    if (space_.discrete) {
      Mat<Scalar> lp = log_probs_row(head);
      out.log_prob = static_cast<double>(lp(0, static_cast<int>(action(0))));
    } else {
      out.log_prob = gaussian_log_prob(head, action);
    }
    return out;
  }

  Eigen::VectorXf deterministic_action(const Eigen::VectorXf& obs) const {
    NoGradGuard no_grad;
    Mat<Scalar> head =
        actor_(encoder_(Tensor<Scalar>(to_row(obs)))).value();
    if (space_.discrete) {
      Eigen::Index a = 0;
      head.row(0).maxCoeff(&a);
      Eigen::VectorXf v(1);
      v << static_cast<float>(a);
      return v;
    }
    Eigen::VectorXf v(space_.dim);
    for (int j = 0; j < space_.dim; ++j)
      v(j) = std::clamp(static_cast<float>(head(0, j)), space_.low, space_.high);
    return v;
  }

  // Batched differentiable evaluation for the PPO losses.
  EvalOut evaluate_actions(const Mat<Scalar>& obs,
                           const std::vector<Eigen::VectorXf>& actions) const {
    const Eigen::Index B = obs.rows();
    if (static_cast<Eigen::Index>(actions.size()) != B)
      throw std::invalid_argument("evaluate_actions: batch size mismatch");
    Tensor<Scalar> z = encoder_(Tensor<Scalar>(Mat<Scalar>(obs)));
    Tensor<Scalar> head = actor_(z);
    EvalOut out;
    out.values = critic_(z);
    if (space_.discrete) {
      Mat<Scalar> onehot = Mat<Scalar>::Zero(B, space_.count);
      for (Eigen::Index i = 0; i < B; ++i)
        onehot(i, static_cast<int>(actions[static_cast<std::size_t>(i)](0))) = Scalar(1);
      Tensor<Scalar> lp = log_softmax(head);
      out.log_probs = sum_rows(mul_const(lp, onehot));
      out.entropy = scale(sum_all(mul(exp(lp), lp)),
                          Scalar(-1) / static_cast<Scalar>(B));
    } else {
      Mat<Scalar> act(B, space_.dim);
      for (Eigen::Index i = 0; i < B; ++i)
        for (int j = 0; j < space_.dim; ++j)
          act(i, j) = static_cast<Scalar>(actions[static_cast<std::size_t>(i)](j));
      Tensor<Scalar> inv_std = exp(scale(log_std_, Scalar(-1)));
      Tensor<Scalar> nd = mul_rowvec(sub(Tensor<Scalar>(std::move(act)), head), inv_std);
      Tensor<Scalar> quad = scale(sum_rows(mul(nd, nd)), Scalar(-0.5));
      // per-row constant: -sum(log_std) - d/2 * log(2*pi)
      const Scalar c = Scalar(-0.5) * space_.dim *
                       static_cast<Scalar>(std::log(2.0 * std::numbers::pi));
      Tensor<Scalar> base = add_const(scale(sum_all(log_std_), Scalar(-1)),
                                      Mat<Scalar>(Mat<Scalar>::Constant(1, 1, c)));
      Tensor<Scalar> ones(Mat<Scalar>::Ones(B, 1));
      out.log_probs = add(quad, matmul(ones, base));
      // Gaussian entropy: sum(log_std) + d/2 * (1 + log(2*pi))
      const Scalar ec = Scalar(0.5) * space_.dim *
                        static_cast<Scalar>(1.0 + std::log(2.0 * std::numbers::pi));
      out.entropy = add_const(sum_all(log_std_), Mat<Scalar>(Mat<Scalar>::Constant(1, 1, ec)));
    }
    return out;
  }

 private:
  static Mat<Scalar> to_row(const Eigen::VectorXf& v) {
    Mat<Scalar> m(1, v.size());
    for (Eigen::Index j = 0; j < v.size(); ++j) m(0, j) = static_cast<Scalar>(v(j));
    return m;
  }

  static Mat<Scalar> log_probs_row(const Mat<Scalar>& logits) {
    Mat<Scalar> lp = logits;
    const Scalar mx = lp.row(0).maxCoeff();
    Scalar lse = 0;
    for (Eigen::Index j = 0; j < lp.cols(); ++j)
      lse += std::exp(lp(0, j) - mx);
    lse = mx + std::log(lse);
    lp.array() -= lse;
    return lp;
  }

  double gaussian_log_prob(const Mat<Scalar>& mean, const Eigen::VectorXf& a) const {
    double lp = -0.5 * space_.dim * std::log(2.0 * std::numbers::pi);
    for (int j = 0; j < space_.dim; ++j) {
      const double ls = static_cast<double>(log_std_.value()(0, j));
      const double sd = std::exp(ls);
      const double d = (static_cast<double>(a(j)) - static_cast<double>(mean(0, j))) / sd;
      lp += -0.5 * d * d - ls;
    }
    return lp;
  }

  ActionSpace space_;
  int embed_dim_ = 0;
  ParamList<Scalar> params_;
  Mlp<Scalar> encoder_, actor_, critic_;
  Tensor<Scalar> log_std_;
};

// --- intrinsic reward providers ----------------------------------------------

// Per-rollout step arrays handed to an explorer.
struct RolloutView {
  const std::vector<Eigen::VectorXf>& obs;
  const std::vector<Eigen::VectorXf>& next_obs;
  const std::vector<Eigen::VectorXf>& actions;
  const std::vector<Eigen::VectorXf>& embeddings;
  const std::vector<bool>& dones;
};

class Explorer {
 public:
  virtual ~Explorer() = default;
  virtual std::string name() const = 0;
  virtual double reward(const RolloutView&, int) { return 0.0; }
  virtual void update(const RolloutView&) {}
  // Behavior-policy perturbation; returns true when the action changed.
  virtual bool perturb(Eigen::VectorXf&, const ActionSpace&, Rng&) { return false; }
  virtual double last_model_loss() const { return 0.0; }
};

class NoneExplorer final : public Explorer {
 public:
  std::string name() const override { return "none"; }
};

class NoiseExplorer final : public Explorer {
 public:
  explicit NoiseExplorer(double scale) : scale_(scale) {}
  std::string name() const override { return "noise"; }

  bool perturb(Eigen::VectorXf& action, const ActionSpace& space,
               Rng& rng) override {
    if (space.discrete) {
      const int a = action_noise_discrete(static_cast<int>(action(0)),
                                          space.count, scale_, rng);
      const bool changed = a != static_cast<int>(action(0));
      action(0) = static_cast<float>(a);
      return changed;
    }
    action = action_noise(action, scale_, space.low, space.high, rng);
    return true;
  }

 private:
  double scale_;
};

class RndExplorer final : public Explorer {
 public:
  RndExplorer(int obs_dim, int feature_dim, int hidden, double lr, Rng& rng)
      : nets_(obs_dim, feature_dim, hidden, rng, static_cast<float>(lr)) {}
  std::string name() const override { return "rnd"; }

  double reward(const RolloutView& v, int t) override {
    return nets_.reward(v.next_obs[static_cast<std::size_t>(t)]);
  }

  void update(const RolloutView& v) override {
    loss_ = nets_.update(v.next_obs);
  }

  double last_model_loss() const override { return loss_; }

 private:
  RndNets<float> nets_;
  double loss_ = 0;
};

class IcmExplorer final : public Explorer {
 public:
  IcmExplorer(int obs_dim, int feature_dim, int hidden, const ActionSpace& space,
              double lr, Rng& rng)
      : nets_(obs_dim, feature_dim, hidden, space.discrete,
              space.discrete ? space.count : space.dim, rng,
              static_cast<float>(lr)) {}
  std::string name() const override { return "icm"; }

  double reward(const RolloutView& v, int t) override {
    const auto i = static_cast<std::size_t>(t);
    return nets_.reward(v.obs[i], v.actions[i], v.next_obs[i]);
  }

  void update(const RolloutView& v) override {
    auto stats = nets_.update(v.obs, v.actions, v.next_obs);
    loss_ = stats.inverse_loss + stats.forward_loss;
  }

  double last_model_loss() const override { return loss_; }

 private:
  IcmNets<float> nets_;
  double loss_ = 0;
};

class MimexExplorer final : public Explorer {
 public:
  MimexExplorer(const MimexConfig& cfg, TransformerConfig tf_cfg, Rng& rng)
      : cfg_(cfg), opt_(static_cast<float>(cfg.learning_rate)), rng_(rng.raw()) {
    cfg_.validate();
    tf_cfg.max_len = std::max(tf_cfg.max_len, cfg_.window_length);
    model_ = MaskedSeqAutoencoder<float>(tf_cfg, rng);
  }
  std::string name() const override { return "mimex"; }

  double reward(const RolloutView& v, int t) override {
    auto w = build_window_from_embeddings<float>(v.embeddings, v.dones, t,
                                                 cfg_.window_length);
    return intrinsic_reward(model_, w, cfg_.mask_spec, rng_);
  }

  void update(const RolloutView& v) override {
    const int n = static_cast<int>(v.embeddings.size());
    std::vector<int> idx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    if (n > cfg_.batch_size) rng_.shuffle(idx);
    const int take = std::min(n, cfg_.batch_size);
    std::vector<EmbeddingWindow<float>> batch;
    batch.reserve(static_cast<std::size_t>(take));
    for (int i = 0; i < take; ++i)
      batch.push_back(build_window_from_embeddings<float>(
          v.embeddings, v.dones, idx[static_cast<std::size_t>(i)],
          cfg_.window_length));
    loss_ = mimex_update(model_, opt_, batch, cfg_.mask_spec, rng_);
  }

  double last_model_loss() const override { return loss_; }
  MaskedSeqAutoencoder<float>& model() { return model_; }

 private:
  MimexConfig cfg_;
  MaskedSeqAutoencoder<float> model_;
  Adam<float> opt_;
  Rng rng_;  // private stream: never touches the policy/env streams
  double loss_ = 0;
};

// --- rollout collection -------------------------------------------------------

struct RolloutBuffer {
  std::vector<Eigen::VectorXf> obs;        // normalized
  std::vector<Eigen::VectorXf> next_obs;   // normalized
  std::vector<Eigen::VectorXf> actions;
  std::vector<Eigen::VectorXf> embeddings;
  std::vector<double> log_probs;
  std::vector<double> values;
  std::vector<double> extrinsic;
  std::vector<double> intrinsic;
  std::vector<bool> dones;
  std::vector<double> advantages;
  std::vector<double> returns;
  double last_value = 0;  // bootstrap for the truncated tail
  int episodes_finished = 0;
  int successes = 0;

  int size() const { return static_cast<int>(obs.size()); }
  RolloutView view() const { return {obs, next_obs, actions, embeddings, dones}; }
};

// Cursor carrying episode state across rollout boundaries.
struct EnvCursor {
  Eigen::VectorXf obs;
  bool need_reset = true;
  std::uint64_t next_episode_seed = 0;
};

template <class Scalar>
RolloutBuffer collect_rollout(const PolicyNet<Scalar>& policy, Env& env,
                              Explorer& explorer, int horizon, Rng& rng,
                              EnvCursor& cursor, const ObsNormalizer& norm) {
  if (horizon < 1) throw std::invalid_argument("collect_rollout: horizon must be >= 1");
  RolloutBuffer buf;
  const ActionSpace space = env.action_space();
  for (int t = 0; t < horizon; ++t) {
    if (cursor.need_reset) {
      cursor.obs = env.reset(cursor.next_episode_seed++);
      cursor.need_reset = false;
    }
    const Eigen::VectorXf no = norm(cursor.obs);
    auto act = policy.act(no, rng);
    if (explorer.perturb(act.action, space, rng))
      act = policy.score(no, act.action);

    StepResult r = env.step(act.action);
    buf.obs.push_back(no);
    buf.next_obs.push_back(norm(r.obs));
    buf.actions.push_back(act.action);
    buf.embeddings.push_back(policy.embed(no));
    buf.log_probs.push_back(act.log_prob);
    buf.values.push_back(act.value);
    buf.extrinsic.push_back(r.reward);
    buf.dones.push_back(r.done);
    if (r.done) {
      ++buf.episodes_finished;
      if (r.success) ++buf.successes;
      cursor.need_reset = true;
    } else {
      cursor.obs = r.obs;
    }
  }

  RolloutView v = buf.view();
  buf.intrinsic.resize(buf.obs.size());
  for (int t = 0; t < buf.size(); ++t)
    buf.intrinsic[static_cast<std::size_t>(t)] = explorer.reward(v, t);
  buf.last_value =
      buf.dones.back() ? 0.0 : policy.score(norm(cursor.obs), buf.actions.back()).value;
  explorer.update(v);
  return buf;
}

// --- GAE and the PPO update ---------------------------------------------------

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

inline GaeResult compute_gae(const std::vector<double>& rewards,
                             const std::vector<double>& values,
                             const std::vector<bool>& dones, double gamma,
                             double lambda, double last_value = 0.0) {
  if (rewards.size() != values.size() || rewards.size() != dones.size())
    throw std::invalid_argument("compute_gae: length mismatch");
  const int n = static_cast<int>(rewards.size());
  GaeResult out;
  out.advantages.resize(rewards.size());
  out.returns.resize(rewards.size());
  double adv = 0;
  for (int t = n - 1; t >= 0; --t) {
    const auto i = static_cast<std::size_t>(t);
    const double not_done = dones[i] ? 0.0 : 1.0;
    const double next_v = (t == n - 1) ? last_value : values[i + 1];
    const double delta = rewards[i] + gamma * next_v * not_done - values[i];
    adv = delta + gamma * lambda * not_done * adv;
    out.advantages[i] = adv;
    out.returns[i] = adv + values[i];
  }
  return out;
}

// In-place mean-0 / std-1 normalization (population std).
inline void normalize_advantages(std::vector<double>& adv) {
  if (adv.empty()) return;
  double mean = 0;
  for (double a : adv) mean += a;
  mean /= static_cast<double>(adv.size());
  double var = 0;
  for (double a : adv) var += (a - mean) * (a - mean);
  var /= static_cast<double>(adv.size());
  const double sd = std::sqrt(std::max(var, 1e-16));
  for (double& a : adv) a = (a - mean) / sd;
}

struct PpoStats {
  double policy_loss = 0;
  double value_loss = 0;
  double entropy = 0;
  double clip_fraction = 0;
};

template <class Scalar>
PpoStats ppo_update(PolicyNet<Scalar>& policy, Adam<Scalar>& opt,
                    RolloutBuffer& buf, const PpoConfig& cfg, Rng& rng) {
  cfg.validate();
  if (buf.advantages.size() != buf.obs.size() ||
      buf.returns.size() != buf.obs.size())
    throw std::invalid_argument("ppo_update: buffer missing advantages/returns");
  normalize_advantages(buf.advantages);

  const int n = buf.size();
  const int obs_dim = static_cast<int>(buf.obs[0].size());
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;

  PpoStats stats;
  int updates = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (int start = 0; start < n; start += cfg.minibatch_size) {
      const int B = std::min(cfg.minibatch_size, n - start);
      Mat<Scalar> obs(B, obs_dim);
      std::vector<Eigen::VectorXf> actions(static_cast<std::size_t>(B));
      Mat<Scalar> old_lp(B, 1), returns(B, 1);
      std::vector<double> adv(static_cast<std::size_t>(B));
      for (int i = 0; i < B; ++i) {
        const auto k = static_cast<std::size_t>(order[static_cast<std::size_t>(start + i)]);
        for (int j = 0; j < obs_dim; ++j)
          obs(i, j) = static_cast<Scalar>(buf.obs[k](j));
        actions[static_cast<std::size_t>(i)] = buf.actions[k];
        old_lp(i, 0) = static_cast<Scalar>(buf.log_probs[k]);
        returns(i, 0) = static_cast<Scalar>(buf.returns[k]);
        adv[static_cast<std::size_t>(i)] = buf.advantages[k];
      }

      zero_grads(policy.params().tensors);
      auto eo = policy.evaluate_actions(obs, actions);
      Tensor<Scalar> ratio = exp(sub(eo.log_probs, Tensor<Scalar>(Mat<Scalar>(old_lp))));

      // clipped surrogate: gradient flows through the ratio only where the
      // unclipped branch is the active minimum
      Mat<Scalar> coef = Mat<Scalar>::Zero(B, 1);
      double const_part = 0, surr_value = 0;
      int clipped = 0;
      for (int i = 0; i < B; ++i) {
        const double r = static_cast<double>(ratio.value()(i, 0));
        const double a = adv[static_cast<std::size_t>(i)];
        const double rc = std::clamp(r, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
        if (rc != r) ++clipped;
        if (r * a <= rc * a) {
          coef(i, 0) = static_cast<Scalar>(a);
          surr_value += r * a;
        } else {
          const_part += rc * a;
          surr_value += rc * a;
        }
      }
      const Scalar inv_b = Scalar(1) / static_cast<Scalar>(B);
      Tensor<Scalar> surrogate = add_const(
          scale(sum_all(mul_const(ratio, coef)), -inv_b),
          Mat<Scalar>(Mat<Scalar>::Constant(1, 1, static_cast<Scalar>(-const_part / B))));
      Tensor<Scalar> value_loss =
          mse(eo.values, Tensor<Scalar>(Mat<Scalar>(returns)));
      Tensor<Scalar> loss =
          add(add(surrogate, scale(value_loss, static_cast<Scalar>(cfg.value_coef))),
              scale(eo.entropy, static_cast<Scalar>(-cfg.entropy_coef)));
      backward(loss);
      opt.step(policy.params().tensors);
      zero_grads(policy.params().tensors);

      stats.policy_loss += -surr_value / B;
      stats.value_loss += static_cast<double>(value_loss.item());
      stats.entropy += static_cast<double>(eo.entropy.item());
      stats.clip_fraction += static_cast<double>(clipped) / B;
      ++updates;
    }
  }
  stats.policy_loss /= updates;
  stats.value_loss /= updates;
  stats.entropy /= updates;
  stats.clip_fraction /= updates;
  return stats;
}

// --- full training loop ---------------------------------------------------------

struct TrainerConfig {
  EnvParams env;
  std::string explorer = "none";  // mimex | rnd | icm | noise | none
  PpoConfig ppo;
  MimexConfig mimex;
  TransformerConfig transformer{32, 2, 2, 16, 1, 2, 4.0, 0, 16};
  double noise_scale = 0.3;  // epsilon (discrete) or sigma (continuous)
  int rnd_feature_dim = 16;
  int rnd_hidden = 32;
  double rnd_lr = 1e-3;
  int icm_feature_dim = 16;
  int icm_hidden = 32;
  double icm_lr = 1e-3;
  int encoder_dim = 32;    // shared embedding width (policy -> windows)
  int policy_hidden = 64;
  long total_steps = 200000;
  int eval_every = 5000;
  int eval_episodes = 10;
  int warmup_steps = 10000;
  std::uint64_t seed = 0;

  void validate() const {
    ppo.validate();
    mimex.validate();
    if (explorer != "mimex" && explorer != "rnd" && explorer != "icm" &&
        explorer != "noise" && explorer != "none")
      throw std::invalid_argument("unknown explorer: " + explorer);
    if (total_steps < 1) throw std::invalid_argument("total_steps must be >= 1");
    if (eval_every < 1) throw std::invalid_argument("eval_every must be >= 1");
    if (eval_episodes < 1) throw std::invalid_argument("eval_episodes must be >= 1");
    if (warmup_steps < 0) throw std::invalid_argument("warmup_steps must be >= 0");
    if (encoder_dim < 1 || policy_hidden < 1)
      throw std::invalid_argument("policy dims must be >= 1");
    if (noise_scale < 0) throw std::invalid_argument("noise_scale must be >= 0");
  }
};

struct CurvePoint {
  long env_steps = 0;
  double success_rate = 0;
  double mean_intrinsic = 0;
  double model_loss = 0;  // explorer model loss (mimex reconstruction etc.)
};

class Trainer {
 public:
  explicit Trainer(const TrainerConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    env_ = make_env(cfg_.env);
    Rng init_rng(cfg_.seed);
    policy_ = PolicyNet<float>(env_->obs_dim(), cfg_.policy_hidden,
                               cfg_.encoder_dim, env_->action_space(), init_rng);
    opt_ = Adam<float>(static_cast<float>(cfg_.ppo.learning_rate));
    explorer_ = make_explorer(init_rng);
    if (cfg_.warmup_steps > 0) {
      auto warm_env = make_env(cfg_.env);
      Rng warm_rng(cfg_.seed ^ 0x5ca1ab1eULL);
      norm_ = warmup_normalizer(*warm_env, cfg_.warmup_steps, warm_rng);
    }
    rng_ = Rng(cfg_.seed + 1);
    cursor_.next_episode_seed = cfg_.seed * 1000003ULL;
  }

  std::vector<CurvePoint> run() {
    std::vector<CurvePoint> curve;
    long steps = 0;
    long next_eval = cfg_.eval_every;
    double ri_sum = 0;
    long ri_count = 0;
    while (steps < cfg_.total_steps) {
      const int h = static_cast<int>(
          std::min<long>(cfg_.ppo.rollout_horizon, cfg_.total_steps - steps));
      RolloutBuffer buf = collect_rollout(policy_, *env_, *explorer_, h, rng_,
                                          cursor_, norm_);
      std::vector<double> mixed(buf.extrinsic.size());
      for (std::size_t i = 0; i < mixed.size(); ++i) {
        double ri = buf.intrinsic[i];
        if (use_normalizer_) ri = ri_norm_.normalize(ri);
        mixed[i] = mix_rewards(buf.extrinsic[i], ri, cfg_.mimex.beta);
        ri_sum += buf.intrinsic[i];
        ++ri_count;
      }
      GaeResult gae = compute_gae(mixed, buf.values, buf.dones, cfg_.ppo.gamma,
                                  cfg_.ppo.lambda, buf.last_value);
      buf.advantages = std::move(gae.advantages);
      buf.returns = std::move(gae.returns);
      ppo_update(policy_, opt_, buf, cfg_.ppo, rng_);
      steps += h;

      if (steps >= next_eval || steps >= cfg_.total_steps) {
        CurvePoint p;
        p.env_steps = steps;
        p.success_rate = evaluate();
        p.mean_intrinsic = ri_count > 0 ? ri_sum / ri_count : 0.0;
        p.model_loss = explorer_->last_model_loss();
        curve.push_back(p);
        ri_sum = 0;
        ri_count = 0;
        while (next_eval <= steps) next_eval += cfg_.eval_every;
      }
    }
    return curve;
  }

  // Deterministic evaluation on extrinsic success only.
  double evaluate() {
    auto eval_env = make_env(cfg_.env);
    int successes = 0;
    for (int ep = 0; ep < cfg_.eval_episodes; ++ep) {
      Eigen::VectorXf obs = eval_env->reset(0xe7a1ULL + cfg_.seed * 131 +
                                            static_cast<std::uint64_t>(ep));
      bool done = false;
      while (!done) {
        StepResult r = eval_env->step(policy_.deterministic_action(norm_(obs)));
        if (r.success) {
          ++successes;
          break;
        }
        done = r.done;
        obs = r.obs;
      }
    }
    return static_cast<double>(successes) / cfg_.eval_episodes;
  }

  PolicyNet<float>& policy() { return policy_; }
  Explorer& explorer() { return *explorer_; }
  const TrainerConfig& config() const { return cfg_; }

 private:
  std::unique_ptr<Explorer> make_explorer(Rng& rng) {
    if (cfg_.explorer == "none") return std::make_unique<NoneExplorer>();
    if (cfg_.explorer == "noise")
      return std::make_unique<NoiseExplorer>(cfg_.noise_scale);
    if (cfg_.explorer == "rnd")
      return std::make_unique<RndExplorer>(env_->obs_dim(), cfg_.rnd_feature_dim,
                                           cfg_.rnd_hidden, cfg_.rnd_lr, rng);
    if (cfg_.explorer == "icm")
      return std::make_unique<IcmExplorer>(env_->obs_dim(), cfg_.icm_feature_dim,
                                           cfg_.icm_hidden, env_->action_space(),
                                           cfg_.icm_lr, rng);
    TransformerConfig tf = cfg_.transformer;
    tf.input_dim = cfg_.encoder_dim;
    use_normalizer_ = cfg_.mimex.normalize_reward;
    return std::make_unique<MimexExplorer>(cfg_.mimex, tf, rng);
  }

  TrainerConfig cfg_;
  std::unique_ptr<Env> env_;
  PolicyNet<float> policy_;
  Adam<float> opt_;
  std::unique_ptr<Explorer> explorer_;
  ObsNormalizer norm_;
  RunningStdNormalizer ri_norm_;
  bool use_normalizer_ = false;
  Rng rng_{0};
  EnvCursor cursor_;
};

inline std::vector<CurvePoint> train(const TrainerConfig& cfg) {
  Trainer t(cfg);
  return t.run();
}

}  // namespace mimex
