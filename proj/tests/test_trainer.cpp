#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mimex/trainer.hpp"

#include <cmath>
#include <memory>
#include <vector>

using namespace mimex;

namespace {

// One-step 2-armed bandit: arm 0 pays 1, arm 1 pays 0.
class Bandit : public Env {
 public:
  std::string name() const override { return "bandit"; }
  int obs_dim() const override { return 1; }
  ActionSpace action_space() const override { return {true, 2, 0, 0, 0}; }
  int horizon() const override { return 10; }
  int step_count() const override { return steps_; }

  Eigen::VectorXf reset(std::uint64_t) override {
    steps_ = 0;
    done_ = false;
    Eigen::VectorXf o(1);
    o << 1.0f;
    return o;
  }

  StepResult step(const Eigen::VectorXf& action) override {
    if (done_) throw std::logic_error("bandit: step after done");
    done_ = true;
    steps_ = 1;
    StepResult r;
    r.obs = Eigen::VectorXf::Ones(1);
    r.reward = static_cast<int>(action(0)) == 0 ? 1.0 : 0.0;
    r.success = r.reward > 0;
    r.done = true;
    return r;
  }

 private:
  int steps_ = 0;
  bool done_ = true;
};

TrainerConfig small_chain_config(int n, const std::string& explorer) {
  TrainerConfig cfg;
  cfg.env.name = "chain";
  cfg.env.chain_n = n;
  cfg.env.level = SparsityLevel::kSparser;
  cfg.explorer = explorer;
  cfg.ppo.rollout_horizon = 256;
  cfg.ppo.learning_rate = 1e-3;
  cfg.mimex.window_length = 3;
  cfg.mimex.batch_size = 32;
  cfg.mimex.mask_spec.num_samples = 1;
  cfg.transformer = TransformerConfig{16, 1, 2, 8, 1, 2, 2.0, 0, 8};
  cfg.encoder_dim = 16;
  cfg.policy_hidden = 32;
  cfg.warmup_steps = 500;
  cfg.eval_every = 2000;
  cfg.eval_episodes = 8;
  return cfg;
}

}  // namespace

TEST_CASE("gae: single step, V=0, r=1, gamma=lambda=1 gives A=1") {
  auto g = compute_gae({1.0}, {0.0}, {true}, 1.0, 1.0);
  CHECK(g.advantages[0] == doctest::Approx(1.0));
  CHECK(g.returns[0] == doctest::Approx(1.0));
}

TEST_CASE("gae: zero rewards and values give zero advantages") {
  auto g = compute_gae(std::vector<double>(6, 0.0), std::vector<double>(6, 0.0),
                       std::vector<bool>(6, false), 0.99, 0.95);
  for (double a : g.advantages) CHECK(a == 0.0);
}

TEST_CASE("gae: matches a brute-force discounted-sum oracle") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 10;
    std::vector<double> r(n), v(n);
    std::vector<bool> d(n, false);
    for (int i = 0; i < n; ++i) {
      r[static_cast<std::size_t>(i)] = rng.uniform(-1, 1);
      v[static_cast<std::size_t>(i)] = rng.uniform(-1, 1);
      d[static_cast<std::size_t>(i)] = rng.uniform() < 0.2;
    }
    const double gamma = 0.99, lambda = 0.95, last_v = rng.uniform(-1, 1);
    auto g = compute_gae(r, v, d, gamma, lambda, last_v);

    // oracle: A_t = sum_l (gamma*lambda)^l * delta_{t+l}, stopping at dones
    for (int t = 0; t < n; ++t) {
      double a = 0, w = 1;
      for (int k = t; k < n; ++k) {
        const double next_v =
            d[static_cast<std::size_t>(k)]
                ? 0.0
                : (k == n - 1 ? last_v : v[static_cast<std::size_t>(k + 1)]);
        a += w * (r[static_cast<std::size_t>(k)] + gamma * next_v -
                  v[static_cast<std::size_t>(k)]);
        if (d[static_cast<std::size_t>(k)]) break;
        w *= gamma * lambda;
      }
      CHECK(g.advantages[static_cast<std::size_t>(t)] == doctest::Approx(a).epsilon(1e-6));
    }
  }
}

TEST_CASE("gae: length mismatch is a contract error") {
  CHECK_THROWS_AS(compute_gae({1.0, 2.0}, {0.0}, {false}, 0.99, 0.95),
                  std::invalid_argument);
}

TEST_CASE("advantage normalization: mean 0, std 1 within 1e-6") {
  Rng rng(8);
  std::vector<double> adv(257);
  for (auto& a : adv) a = rng.uniform(-3, 7);
  normalize_advantages(adv);
  double mean = 0;
  for (double a : adv) mean += a;
  mean /= static_cast<double>(adv.size());
  double var = 0;
  for (double a : adv) var += (a - mean) * (a - mean);
  var /= static_cast<double>(adv.size());
  CHECK(std::abs(mean) < 1e-6);
  CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-6);
}

TEST_CASE("collect_rollout: explorer none yields zero intrinsic, full length") {
  ChainMdp env(6, SparsityLevel::kSparser, 20);
  Rng init(3), roll(4);
  PolicyNet<float> policy(env.obs_dim(), 16, 8, env.action_space(), init);
  NoneExplorer none;
  EnvCursor cursor;
  ObsNormalizer norm;
  RolloutBuffer buf = collect_rollout(policy, env, none, 64, roll, cursor, norm);
  CHECK(buf.size() == 64);
  for (double ri : buf.intrinsic) CHECK(ri == 0.0);
  CHECK(buf.episodes_finished > 0);
}

TEST_CASE("collect_rollout: fixed seeds give bit-identical collections") {
  auto collect = [] {
    ChainMdp env(6, SparsityLevel::kSparser, 20);
    Rng init(3), roll(4);
    PolicyNet<float> policy(env.obs_dim(), 16, 8, env.action_space(), init);
    NoiseExplorer noise(0.2);
    EnvCursor cursor;
    ObsNormalizer norm;
    return collect_rollout(policy, env, noise, 100, roll, cursor, norm);
  };
  RolloutBuffer a = collect();
  RolloutBuffer b = collect();
  REQUIRE(a.size() == b.size());
  for (int i = 0; i < a.size(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    CHECK(a.actions[k](0) == b.actions[k](0));
    CHECK(a.log_probs[k] == b.log_probs[k]);
    CHECK(a.values[k] == b.values[k]);
    CHECK(a.extrinsic[k] == b.extrinsic[k]);
    CHECK(a.dones[k] == b.dones[k]);
    for (Eigen::Index j = 0; j < a.obs[k].size(); ++j)
      CHECK(a.obs[k](j) == b.obs[k](j));
  }
}

TEST_CASE("ppo: zero advantages give zero surrogate gradient") {
  Rng init(5);
  ActionSpace space{true, 3, 0, 0, 0};
  PolicyNet<float> policy(4, 16, 8, space, init);
  const int B = 8;
  Mat<float> obs(B, 4);
  std::vector<Eigen::VectorXf> actions;
  Mat<float> old_lp(B, 1);
  Rng rng(6);
  for (int i = 0; i < B; ++i) {
    for (int j = 0; j < 4; ++j) obs(i, j) = static_cast<float>(rng.normal());
    Eigen::VectorXf a(1);
    a << static_cast<float>(rng.uniform_int(3));
    actions.push_back(a);
    old_lp(i, 0) = -1.0f;
  }

  zero_grads(policy.params().tensors);
  auto eo = policy.evaluate_actions(obs, actions);
  Tensor<float> ratio = exp(sub(eo.log_probs, Tensor<float>(Mat<float>(old_lp))));
  Mat<float> coef = Mat<float>::Zero(B, 1);  // advantages all zero
  Tensor<float> surrogate = scale(sum_all(mul_const(ratio, coef)), -1.0f / B);
  backward(surrogate);
  for (auto& p : policy.params().tensors)
    CHECK(p.grad().cwiseAbs().maxCoeff() == 0.0f);
}

TEST_CASE("ppo: ratio is exactly 1 at the start of the first epoch") {
  ChainMdp env(6, SparsityLevel::kSparser, 20);
  Rng init(9), roll(10);
  PolicyNet<float> policy(env.obs_dim(), 16, 8, env.action_space(), init);
  NoneExplorer none;
  EnvCursor cursor;
  ObsNormalizer norm;
  RolloutBuffer buf = collect_rollout(policy, env, none, 32, roll, cursor, norm);
  Mat<float> obs(buf.size(), env.obs_dim());
  for (int i = 0; i < buf.size(); ++i)
    for (int j = 0; j < env.obs_dim(); ++j)
      obs(i, j) = buf.obs[static_cast<std::size_t>(i)](j);
  auto eo = policy.evaluate_actions(obs, buf.actions);
  for (int i = 0; i < buf.size(); ++i) {
    const double ratio = std::exp(
        static_cast<double>(eo.log_probs.value()(i, 0)) -
        buf.log_probs[static_cast<std::size_t>(i)]);
    CHECK(ratio == doctest::Approx(1.0).epsilon(1e-4));
  }
}

TEST_CASE("ppo: bandit updates drive P(arm 0) above 0.95") {
  Bandit env;
  Rng init(11), rng(12);
  PolicyNet<float> policy(1, 16, 8, env.action_space(), init);
  Adam<float> opt(3e-3f);
  PpoConfig cfg;
  cfg.rollout_horizon = 32;
  cfg.minibatch_size = 32;
  cfg.epochs = 2;
  EnvCursor cursor;
  ObsNormalizer norm;
  for (int it = 0; it < 200; ++it) {
    RolloutBuffer buf = collect_rollout(policy, env, *std::make_unique<NoneExplorer>(),
                                        cfg.rollout_horizon, rng, cursor, norm);
    auto g = compute_gae(buf.extrinsic, buf.values, buf.dones, cfg.gamma,
                         cfg.lambda, buf.last_value);
    buf.advantages = std::move(g.advantages);
    buf.returns = std::move(g.returns);
    ppo_update(policy, opt, buf, cfg, rng);
  }
  Eigen::VectorXf obs = Eigen::VectorXf::Ones(1);
  Eigen::VectorXf arm0(1);
  arm0 << 0.0f;
  const double p0 = std::exp(policy.score(obs, arm0).log_prob);
  CHECK(p0 > 0.95);
}

TEST_CASE("train: easy chain reaches success rate 1.0 within 2e4 steps") {
  TrainerConfig cfg = small_chain_config(5, "none");
  cfg.total_steps = 20000;
  cfg.seed = 1;
  auto curve = train(cfg);
  REQUIRE(!curve.empty());
  long prev = 0;
  for (const auto& p : curve) {
    CHECK(p.env_steps > prev);
    prev = p.env_steps;
  }
  CHECK(curve.back().success_rate == doctest::Approx(1.0));
}

TEST_CASE("train: beta=0 mimex matches explorer=none policy exactly") {
  TrainerConfig base = small_chain_config(4, "none");
  base.total_steps = 2048;
  base.eval_every = 1024;
  base.seed = 3;

  Trainer none_t(base);
  none_t.run();

  TrainerConfig mx = base;
  mx.explorer = "mimex";
  mx.mimex.beta = 0.0;
  Trainer mimex_t(mx);
  auto curve = mimex_t.run();

  auto& a = none_t.policy().params().tensors;
  auto& b = mimex_t.policy().params().tensors;
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a[i].rows() == b[i].rows());
    for (Eigen::Index j = 0; j < a[i].size(); ++j)
      CHECK(a[i].value()(j) == b[i].value()(j));
  }
  // the mimex run still measured nonzero novelty, it just never mixed it in
  CHECK(curve.back().mean_intrinsic > 0.0);
}

TEST_CASE("train: bit-reproducible end to end with fixed seeds") {
  TrainerConfig cfg = small_chain_config(4, "mimex");
  cfg.total_steps = 1536;
  cfg.eval_every = 512;
  cfg.seed = 5;

  Trainer t1(cfg);
  auto c1 = t1.run();
  Trainer t2(cfg);
  auto c2 = t2.run();

  REQUIRE(c1.size() == c2.size());
  for (std::size_t i = 0; i < c1.size(); ++i) {
    CHECK(c1[i].env_steps == c2[i].env_steps);
    CHECK(c1[i].success_rate == c2[i].success_rate);
    CHECK(c1[i].mean_intrinsic == c2[i].mean_intrinsic);
    CHECK(c1[i].model_loss == c2[i].model_loss);
  }
  auto& a = t1.policy().params().tensors;
  auto& b = t2.policy().params().tensors;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (Eigen::Index j = 0; j < a[i].size(); ++j)
      CHECK(a[i].value()(j) == b[i].value()(j));
}

TEST_CASE("train: rnd, icm and noise explorers run and report finite stats") {
  for (const char* explorer : {"rnd", "icm", "noise"}) {
    TrainerConfig cfg = small_chain_config(4, explorer);
    cfg.total_steps = 1024;
    cfg.eval_every = 512;
    cfg.seed = 2;
    auto curve = train(cfg);
    REQUIRE(!curve.empty());
    for (const auto& p : curve) {
      CHECK(std::isfinite(p.success_rate));
      CHECK(std::isfinite(p.mean_intrinsic));
      CHECK(p.mean_intrinsic >= 0.0);
    }
  }
}

TEST_CASE("trainer config validation rejects bad fields") {
  TrainerConfig cfg = small_chain_config(4, "none");
  cfg.explorer = "oracle";
  CHECK_THROWS_AS(Trainer{cfg}, std::invalid_argument);
  cfg = small_chain_config(4, "none");
  cfg.ppo.clip_eps = 0.0;
  CHECK_THROWS_AS(Trainer{cfg}, std::invalid_argument);
  cfg = small_chain_config(4, "none");
  cfg.ppo.gamma = 1.5;
  CHECK_THROWS_AS(Trainer{cfg}, std::invalid_argument);
}
