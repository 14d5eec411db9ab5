#pragma once

// Pseudo log-likelihood diagnostics on small categorical toys. Validates the
// masked-prediction-as-likelihood framing on models where the conditionals
// can be enumerated exactly.

#include "mimex/rng.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace mimex {

// Joint distribution over fixed-length sequences of symbols in {0..V-1},
// stored as a dense table. Conditionals p(x_t | X_\t) come from exact
// marginalization.
class CategoricalToyModel {
 public:
  CategoricalToyModel(int length, int vocab, std::vector<double> joint)
      : length_(length), vocab_(vocab), joint_(std::move(joint)) {
    if (length_ < 1 || vocab_ < 1)
      throw std::invalid_argument("toy model: length and vocab must be >= 1");
    std::size_t expect = 1;
    for (int i = 0; i < length_; ++i) expect *= static_cast<std::size_t>(vocab_);
    if (joint_.size() != expect)
      throw std::invalid_argument("toy model: joint table size mismatch");
    double s = 0;
    for (double p : joint_) {
      if (p < 0) throw std::invalid_argument("toy model: negative probability");
      s += p;
    }
    if (std::abs(s - 1.0) > 1e-9)
      throw std::invalid_argument("toy model: joint does not sum to 1");
  }

  static CategoricalToyModel uniform(int length, int vocab) {
    std::size_t n = 1;
    for (int i = 0; i < length; ++i) n *= static_cast<std::size_t>(vocab);
    return CategoricalToyModel(length, vocab,
                               std::vector<double>(n, 1.0 / static_cast<double>(n)));
  }

  static CategoricalToyModel random(int length, int vocab, Rng& rng) {
    std::size_t n = 1;
    for (int i = 0; i < length; ++i) n *= static_cast<std::size_t>(vocab);
    std::vector<double> j(n);
    double s = 0;
    for (auto& p : j) {
      p = rng.uniform(0.05, 1.0);  // bounded away from zero conditionals
      s += p;
    }
    for (auto& p : j) p /= s;
    return CategoricalToyModel(length, vocab, std::move(j));
  }

  int length() const { return length_; }
  int vocab() const { return vocab_; }

  // p(x_t = seq[t] | X_\t = seq elsewhere)
  double conditional(const std::vector<int>& seq, int t) const {
    check_seq(seq);
    if (t < 0 || t >= length_) throw std::invalid_argument("toy model: bad position");
    double denom = 0;
    std::vector<int> s = seq;
    for (int v = 0; v < vocab_; ++v) {
      s[static_cast<std::size_t>(t)] = v;
      denom += joint_[index(s)];
    }
    if (denom <= 0) throw std::domain_error("toy model: zero-probability context");
    return joint_[index(seq)] / denom;
  }

  // Exact per-position average: (1/T) * sum_t log p(x_t | X_\t)
  double exact_pll(const std::vector<int>& seq) const {
    double s = 0;
    for (int t = 0; t < length_; ++t) s += std::log(conditional(seq, t));
    return s / static_cast<double>(length_);
  }

 private:
  void check_seq(const std::vector<int>& seq) const {
    if (static_cast<int>(seq.size()) != length_)
      throw std::invalid_argument("toy model: sequence length mismatch");
    for (int x : seq)
      if (x < 0 || x >= vocab_)
        throw std::invalid_argument("toy model: symbol out of range");
  }

  std::size_t index(const std::vector<int>& seq) const {
    std::size_t idx = 0;
    for (int x : seq) idx = idx * static_cast<std::size_t>(vocab_) + static_cast<std::size_t>(x);
    return idx;
  }

  int length_;
  int vocab_;
  std::vector<double> joint_;
};

// Stochastic estimator: draw K positions uniformly, average the log
// conditionals.
inline double pll_estimate(const CategoricalToyModel& model,
                           const std::vector<int>& seq, long K, Rng& rng) {
  if (K < 1) throw std::invalid_argument("pll_estimate: K must be >= 1");
  double s = 0;
  for (long k = 0; k < K; ++k) {
    const int t = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(model.length())));
    s += std::log(model.conditional(seq, t));
  }
  return s / static_cast<double>(K);
}

// Stratified variant: positions visited round-robin. With K == length the
// estimate equals the exact average.
inline double pll_estimate_stratified(const CategoricalToyModel& model,
                                      const std::vector<int>& seq, long K) {
  if (K < 1) throw std::invalid_argument("pll_estimate: K must be >= 1");
  double s = 0;
  for (long k = 0; k < K; ++k)
    s += std::log(model.conditional(seq, static_cast<int>(k % model.length())));
  return s / static_cast<double>(K);
}

}  // namespace mimex
