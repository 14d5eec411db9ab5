#pragma once

#include "mimex/rng.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstring>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mimex {

enum class SparsityLevel { kDense, kSparse, kSparser };

inline const char* to_string(SparsityLevel s) {
  switch (s) {
    case SparsityLevel::kDense: return "dense";
    case SparsityLevel::kSparse: return "sparse";
    case SparsityLevel::kSparser: return "sparser";
  }
  return "?";
}

inline SparsityLevel sparsity_from_string(const std::string& s) {
  if (s == "dense") return SparsityLevel::kDense;
  if (s == "sparse") return SparsityLevel::kSparse;
  if (s == "sparser") return SparsityLevel::kSparser;
  throw std::invalid_argument("unknown sparsity level: " + s);
}

struct ActionSpace {
  bool discrete = true;
  int count = 2;      // discrete
  int dim = 0;        // continuous
  float low = -1.0f;  // continuous bounds
  float high = 1.0f;
};

struct StepResult {
  Eigen::VectorXf obs;
  double reward = 0.0;
  bool done = false;
  bool success = false;  // terminal bonus reached this step
};

class Env {
 public:
  virtual ~Env() = default;
  virtual std::string name() const = 0;
  virtual int obs_dim() const = 0;
  virtual ActionSpace action_space() const = 0;
  virtual int horizon() const = 0;
  virtual Eigen::VectorXf reset(std::uint64_t seed) = 0;
  virtual StepResult step(const Eigen::VectorXf& action) = 0;
  virtual int step_count() const = 0;
  // Underlying discrete state, when one exists (-1 otherwise). Used by the
  // lifting wrapper and the linear-probe diagnostics.
  virtual int state_id() const { return -1; }
  virtual int num_states() const { return -1; }
};

// Classic deep-exploration chain: states 0..N-1, start at 0. `right` advances
// one state, `left` drops back to the start, so success within one episode
// requires N-1 consecutive rights. Terminal bonus at state N-1.
class ChainMdp : public Env {
 public:
  ChainMdp(int n, SparsityLevel level, int horizon = 0)
      : n_(n), level_(level), horizon_(horizon > 0 ? horizon : n - 1) {
    if (n_ < 2) throw std::invalid_argument("ChainMDP: N must be >= 2");
  }

  std::string name() const override { return "chain"; }
  int obs_dim() const override { return n_; }
  ActionSpace action_space() const override { return {true, 2, 0, 0, 0}; }
  int horizon() const override { return horizon_; }
  int step_count() const override { return steps_; }
  int state_id() const override { return pos_; }
  int num_states() const override { return n_; }

  Eigen::VectorXf reset(std::uint64_t /*seed*/) override {
    pos_ = 0;
    steps_ = 0;
    done_ = false;
    milestone_paid_ = false;
    return observe();
  }

  StepResult step(const Eigen::VectorXf& action) override {
    require_live();
    const int a = static_cast<int>(action(0));
    if (a != 0 && a != 1) throw std::invalid_argument("ChainMDP: action must be 0 or 1");
    pos_ = (a == 1) ? std::min(pos_ + 1, n_ - 1) : 0;
    ++steps_;

    StepResult r;
    if (pos_ == n_ - 1) {
      r.reward += 1.0;  // terminal bonus, present at every level
      r.success = true;
      done_ = true;
    }
    if (level_ != SparsityLevel::kSparser && !milestone_paid_ &&
        pos_ >= (n_ + 1) / 2) {
      r.reward += 0.5;
      milestone_paid_ = true;
    }
    if (level_ == SparsityLevel::kDense)
      r.reward += 0.05 * static_cast<double>(pos_) / (n_ - 1);
    if (steps_ >= horizon_) done_ = true;
    r.done = done_;
    r.obs = observe();
    return r;
  }

 private:
  void require_live() const {
    if (done_) throw std::logic_error("ChainMDP: step() after done");
  }
  Eigen::VectorXf observe() const {
    Eigen::VectorXf o = Eigen::VectorXf::Zero(n_);
    o(pos_) = 1.0f;
    return o;
  }

  int n_;
  SparsityLevel level_;
  int horizon_;
  int pos_ = 0;
  int steps_ = 0;
  bool done_ = true;
  bool milestone_paid_ = false;
};

// Grid with a wall splitting the world; the agent must fetch the key in the
// left region, pass the door, and reach the goal in the far corner.
// Actions: 0 up, 1 down, 2 left, 3 right.
class KeyDoorGrid : public Env {
 public:
  KeyDoorGrid(int width, int height, SparsityLevel level, int horizon = 0)
      : w_(width), h_(height), level_(level),
        horizon_(horizon > 0 ? horizon : 8 * (width + height)) {
    if (w_ < 3 || h_ < 2) throw std::invalid_argument("KeyDoorGrid: too small");
    wall_x_ = w_ / 2;
    door_y_ = h_ / 2;
    key_x_ = 0;
    key_y_ = h_ - 1;
    goal_x_ = w_ - 1;
    goal_y_ = h_ - 1;
  }

  std::string name() const override { return "keydoor"; }
  int obs_dim() const override { return w_ + h_ + 2; }
  ActionSpace action_space() const override { return {true, 4, 0, 0, 0}; }
  int horizon() const override { return horizon_; }
  int step_count() const override { return steps_; }
  int state_id() const override {
    return ((y_ * w_ + x_) << 2) | (has_key_ ? 2 : 0) | (door_open_ ? 1 : 0);
  }
  int num_states() const override { return w_ * h_ * 4; }

  Eigen::VectorXf reset(std::uint64_t /*seed*/) override {
    x_ = 0;
    y_ = 0;
    has_key_ = false;
    door_open_ = false;
    steps_ = 0;
    done_ = false;
    return observe();
  }

  StepResult step(const Eigen::VectorXf& action) override {
    if (done_) throw std::logic_error("KeyDoorGrid: step() after done");
    const int a = static_cast<int>(action(0));
    if (a < 0 || a > 3) throw std::invalid_argument("KeyDoorGrid: bad action");
    int nx = x_, ny = y_;
    if (a == 0) ny = std::min(y_ + 1, h_ - 1);
    if (a == 1) ny = std::max(y_ - 1, 0);
    if (a == 2) nx = std::max(x_ - 1, 0);
    if (a == 3) nx = std::min(x_ + 1, w_ - 1);
    if (blocked(nx, ny)) {
      nx = x_;
      ny = y_;
    }
    x_ = nx;
    y_ = ny;
    ++steps_;

    StepResult r;
    if (!has_key_ && x_ == key_x_ && y_ == key_y_) {
      has_key_ = true;
      if (level_ != SparsityLevel::kSparser) r.reward += 0.5;  // first pickup only
    }
    if (has_key_ && x_ == wall_x_ && y_ == door_y_ && !door_open_) {
      door_open_ = true;
      if (level_ != SparsityLevel::kSparser) r.reward += 1.0;
    }
    if (x_ == goal_x_ && y_ == goal_y_) {
      r.reward += 1.0;
      r.success = true;
      done_ = true;
    }
    if (level_ == SparsityLevel::kDense) {
      const double tx = has_key_ ? goal_x_ : key_x_;
      const double ty = has_key_ ? goal_y_ : key_y_;
      const double dist = std::abs(x_ - tx) + std::abs(y_ - ty);
      const double max_dist = w_ + h_;
      r.reward += 0.02 * (1.0 - dist / max_dist);
    }
    if (steps_ >= horizon_) done_ = true;
    r.done = done_;
    r.obs = observe();
    return r;
  }

 private:
  bool blocked(int nx, int ny) const {
    if (nx != wall_x_) return false;
    if (ny == door_y_) return !has_key_;  // door passable with the key
    return true;                          // wall
  }

  Eigen::VectorXf observe() const {
    Eigen::VectorXf o = Eigen::VectorXf::Zero(w_ + h_ + 2);
    o(x_) = 1.0f;
    o(w_ + y_) = 1.0f;
    o(w_ + h_) = has_key_ ? 1.0f : 0.0f;
    o(w_ + h_ + 1) = door_open_ ? 1.0f : 0.0f;
    return o;
  }

  int w_, h_;
  SparsityLevel level_;
  int horizon_;
  int wall_x_, door_y_, key_x_, key_y_, goal_x_, goal_y_;
  int x_ = 0, y_ = 0;
  bool has_key_ = false, door_open_ = false;
  int steps_ = 0;
  bool done_ = true;
};

// Velocity-controlled point in [-1,1]^2 that must enter a small goal ball.
class ContinuousPoint : public Env {
 public:
  explicit ContinuousPoint(SparsityLevel level, int horizon = 60)
      : level_(level), horizon_(horizon) {}

  std::string name() const override { return "point"; }
  int obs_dim() const override { return 2; }
  ActionSpace action_space() const override { return {false, 0, 2, -0.2f, 0.2f}; }
  int horizon() const override { return horizon_; }
  int step_count() const override { return steps_; }

  Eigen::VectorXf reset(std::uint64_t seed) override {
    Rng rng(seed);
    x_ = -0.8 + 0.05 * rng.normal();
    y_ = -0.8 + 0.05 * rng.normal();
    clamp();
    steps_ = 0;
    done_ = false;
    milestone_paid_ = false;
    return observe();
  }

  StepResult step(const Eigen::VectorXf& action) override {
    if (done_) throw std::logic_error("ContinuousPoint: step() after done");
    if (action.size() != 2)
      throw std::invalid_argument("ContinuousPoint: action must be 2-D");
    const double vx = std::clamp(static_cast<double>(action(0)), -0.2, 0.2);
    const double vy = std::clamp(static_cast<double>(action(1)), -0.2, 0.2);
    x_ += vx;
    y_ += vy;
    clamp();
    ++steps_;

    StepResult r;
    const double dist = std::hypot(x_ - kGoalX, y_ - kGoalY);
    if (dist < kGoalRadius) {
      r.reward += 1.0;
      r.success = true;
      done_ = true;
    }
    if (level_ != SparsityLevel::kSparser && !milestone_paid_ && dist < 0.4) {
      r.reward += 0.5;
      milestone_paid_ = true;
    }
    if (level_ == SparsityLevel::kDense)
      r.reward += 0.02 * (1.0 - dist / kMaxDist);
    if (steps_ >= horizon_) done_ = true;
    r.done = done_;
    r.obs = observe();
    return r;
  }

 private:
  static constexpr double kGoalX = 0.7, kGoalY = 0.7;
  static constexpr double kGoalRadius = 0.1;
  static constexpr double kMaxDist = 2.8284271247461903;  // diag of [-1,1]^2

  void clamp() {
    x_ = std::clamp(x_, -1.0, 1.0);
    y_ = std::clamp(y_, -1.0, 1.0);
  }
  Eigen::VectorXf observe() const {
    Eigen::VectorXf o(2);
    o << static_cast<float>(x_), static_cast<float>(y_);
    return o;
  }

  SparsityLevel level_;
  int horizon_;
  double x_ = 0, y_ = 0;
  int steps_ = 0;
  bool done_ = true;
  bool milestone_paid_ = false;
};

// Lifts observations into D dimensions through a fixed random orthonormal
// projection of the one-hot underlying state (or of the raw observation for
// continuous-state envs), plus additive Gaussian noise.
class NoisyLiftWrapper : public Env {
 public:
  NoisyLiftWrapper(std::unique_ptr<Env> base, int lift_dim,
                   std::uint64_t projection_seed = 7, double noise_sigma = 0.05)
      : base_(std::move(base)), lift_dim_(lift_dim), sigma_(noise_sigma),
        noise_rng_(projection_seed + 1) {
    const int d = base_->num_states() > 0 ? base_->num_states() : base_->obs_dim();
    if (lift_dim_ < d)
      throw std::invalid_argument(
          "NoisyLiftWrapper: lift dim must be >= underlying dimension");
    Rng rng(projection_seed);
    Eigen::MatrixXd g(lift_dim_, d);
    for (Eigen::Index i = 0; i < g.size(); ++i) g(i) = rng.normal();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(lift_dim_, d);
    proj_ = q.cast<float>();
  }

  std::string name() const override { return "noisy_" + base_->name(); }
  int obs_dim() const override { return lift_dim_; }
  ActionSpace action_space() const override { return base_->action_space(); }
  int horizon() const override { return base_->horizon(); }
  int step_count() const override { return base_->step_count(); }
  int state_id() const override { return base_->state_id(); }
  int num_states() const override { return base_->num_states(); }

  Eigen::VectorXf reset(std::uint64_t seed) override {
    noise_rng_ = Rng(seed ^ 0xabcdef1234567890ULL);
    return lift(base_->reset(seed));
  }

  StepResult step(const Eigen::VectorXf& action) override {
    StepResult r = base_->step(action);
    r.obs = lift(r.obs);
    return r;
  }

 private:
  Eigen::VectorXf lift(const Eigen::VectorXf& obs) {
    Eigen::VectorXf in;
    if (base_->num_states() > 0) {
      in = Eigen::VectorXf::Zero(base_->num_states());
      in(base_->state_id()) = 1.0f;
    } else {
      in = obs;
    }
    Eigen::VectorXf out = proj_ * in;
    for (Eigen::Index i = 0; i < out.size(); ++i)
      out(i) += static_cast<float>(sigma_ * noise_rng_.normal());
    return out;
  }

  std::unique_ptr<Env> base_;
  int lift_dim_;
  double sigma_;
  Rng noise_rng_;
  Eigen::MatrixXf proj_;
};

// Optional episode trace dump: step, state id (or an observation hash when no
// discrete state exists), first action coordinate, reward, done.
struct TraceRow {
  int step = 0;
  long long state = 0;
  float action = 0;
  double reward = 0;
  bool done = false;
};

inline long long obs_hash(const Eigen::VectorXf& obs) {
  std::uint64_t h = 1469598103934665603ULL;
  for (Eigen::Index i = 0; i < obs.size(); ++i) {
    std::uint32_t bits;
    const float v = obs(i);
    std::memcpy(&bits, &v, sizeof bits);
    h = (h ^ bits) * 1099511628211ULL;
  }
  return static_cast<long long>(h >> 1);
}

inline void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& rows) {
  os << "step,state,action,reward,done\n";
  for (const auto& r : rows)
    os << r.step << ',' << r.state << ',' << r.action << ',' << r.reward << ','
       << (r.done ? 1 : 0) << '\n';
}

// --- registry ---------------------------------------------------------------

struct EnvParams {
  std::string name = "chain";
  SparsityLevel level = SparsityLevel::kSparser;
  int chain_n = 25;
  int grid_width = 7;
  int grid_height = 7;
  int horizon = 0;    // 0 = env default
  int lift_dim = 0;   // > 0 wraps in NoisyLiftWrapper
  std::uint64_t lift_seed = 7;
};

inline std::unique_ptr<Env> make_env(const EnvParams& p) {
  std::unique_ptr<Env> env;
  if (p.name == "chain")
    env = std::make_unique<ChainMdp>(p.chain_n, p.level, p.horizon);
  else if (p.name == "keydoor")
    env = std::make_unique<KeyDoorGrid>(p.grid_width, p.grid_height, p.level, p.horizon);
  else if (p.name == "point")
    env = std::make_unique<ContinuousPoint>(p.level, p.horizon > 0 ? p.horizon : 60);
  else
    throw std::invalid_argument("unknown env name: " + p.name);
  if (p.lift_dim > 0)
    env = std::make_unique<NoisyLiftWrapper>(std::move(env), p.lift_dim, p.lift_seed);
  return env;
}

struct EnvCatalogEntry {
  std::string name;
  int obs_dim;
  ActionSpace action_space;
  int horizon;
};

inline std::vector<EnvCatalogEntry> env_catalog() {
  std::vector<EnvCatalogEntry> entries;
  {
    ChainMdp e(30, SparsityLevel::kSparser);
    entries.push_back({"chain", e.obs_dim(), e.action_space(), e.horizon()});
  }
  {
    KeyDoorGrid e(7, 7, SparsityLevel::kSparse);
    entries.push_back({"keydoor", e.obs_dim(), e.action_space(), e.horizon()});
  }
  {
    ContinuousPoint e(SparsityLevel::kSparser);
    entries.push_back({"point", e.obs_dim(), e.action_space(), e.horizon()});
  }
  {
    NoisyLiftWrapper e(std::make_unique<ChainMdp>(30, SparsityLevel::kSparser), 64);
    entries.push_back({"noisy_chain", e.obs_dim(), e.action_space(), e.horizon()});
  }
  return entries;
}

}  // namespace mimex
