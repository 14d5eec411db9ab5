#pragma once

#include "mimex/rng.hpp"
#include "mimex/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mimex {

enum class MaskKind {
  kUniformTime,
  kUniformFeature,
  kFixedLastToken,
  kFixedCurrentToken,
};

inline const char* to_string(MaskKind k) {
  switch (k) {
    case MaskKind::kUniformTime: return "uniform_time";
    case MaskKind::kUniformFeature: return "uniform_feature";
    case MaskKind::kFixedLastToken: return "fixed_last_token";
    case MaskKind::kFixedCurrentToken: return "fixed_current_token";
  }
  return "?";
}

inline MaskKind mask_kind_from_string(const std::string& s) {
  if (s == "uniform_time") return MaskKind::kUniformTime;
  if (s == "uniform_feature") return MaskKind::kUniformFeature;
  if (s == "fixed_last_token") return MaskKind::kFixedLastToken;
  if (s == "fixed_current_token") return MaskKind::kFixedCurrentToken;
  throw std::invalid_argument("unknown mask kind: " + s);
}

struct MaskSpec {
  MaskKind kind = MaskKind::kUniformTime;
  double ratio = 0.70;   // ignored for fixed kinds
  int num_samples = 5;   // M, reward-averaging only

  void validate() const {
    if (ratio < 0.0 || ratio >= 1.0)
      throw std::invalid_argument("mask ratio must be in [0,1)");
    if (num_samples < 1)
      throw std::invalid_argument("mask num_samples must be >= 1");
  }
};

// time_mask[i] == true means slot i is masked (prediction target).
struct Mask {
  std::vector<bool> time_mask;
  std::optional<std::vector<bool>> feature_mask;  // T*D cells, row-major

  int masked_count() const {
    int n = 0;
    for (bool m : time_mask) n += m ? 1 : 0;
    return n;
  }
  int kept_count() const { return static_cast<int>(time_mask.size()) - masked_count(); }
};

// MAE keep rule: keep floor(T*(1-ratio)) tokens, clamped to [1, T-1] so both
// the context and the target are nonempty. T == 1 masks the single token.
inline int time_keep_count(int T, double ratio) {
  if (T < 1) throw std::invalid_argument("time_keep_count: T must be >= 1");
  if (T == 1) return 0;
  const int keep = static_cast<int>(std::floor(static_cast<double>(T) * (1.0 - ratio)));
  return std::clamp(keep, 1, T - 1);
}

// Uniform random subset via seeded shuffle; all subsets of the keep size are
// equiprobable.
inline Mask sample_time_mask(int T, double ratio, Rng& rng) {
  if (T < 1) throw std::invalid_argument("sample_time_mask: T must be >= 1");
  const int keep = time_keep_count(T, ratio);
  std::vector<int> order(static_cast<std::size_t>(T));
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  Mask m;
  m.time_mask.assign(static_cast<std::size_t>(T), true);
  for (int i = 0; i < keep; ++i)
    m.time_mask[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = false;
  return m;
}

// Uniform subset over all T*D cells; every token row stays in the sequence.
inline Mask sample_feature_mask(int T, int D, double ratio, Rng& rng) {
  const long cells = static_cast<long>(T) * D;
  if (cells < 2)
    throw std::invalid_argument("sample_feature_mask: need T*D >= 2");
  long count = static_cast<long>(std::floor(static_cast<double>(cells) * ratio));
  count = std::clamp(count, 1L, cells - 1);
  std::vector<int> order(static_cast<std::size_t>(cells));
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  Mask m;
  m.time_mask.assign(static_cast<std::size_t>(T), false);
  m.feature_mask = std::vector<bool>(static_cast<std::size_t>(cells), false);
  for (long i = 0; i < count; ++i)
    (*m.feature_mask)[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = true;
  return m;
}

// fixed_last_token: mask exactly the final slot, conditioning on history
// (requires T >= 2). fixed_current_token: the single current-step token with
// no context (T == 1).
inline Mask fixed_mask(MaskKind kind, int T) {
  Mask m;
  switch (kind) {
    case MaskKind::kFixedLastToken:
      if (T < 2)
        throw std::invalid_argument("fixed_last_token needs T >= 2");
      m.time_mask.assign(static_cast<std::size_t>(T), false);
      m.time_mask.back() = true;
      return m;
    case MaskKind::kFixedCurrentToken:
      if (T < 1)
        throw std::invalid_argument("fixed_current_token needs T >= 1");
      m.time_mask.assign(static_cast<std::size_t>(T), false);
      m.time_mask.back() = true;
      return m;
    default:
      throw std::invalid_argument("fixed_mask: kind is not a fixed mask");
  }
}

inline Mask sample_mask(const MaskSpec& spec, int T, int D, Rng& rng) {
  switch (spec.kind) {
    case MaskKind::kUniformTime: return sample_time_mask(T, spec.ratio, rng);
    case MaskKind::kUniformFeature: return sample_feature_mask(T, D, spec.ratio, rng);
    case MaskKind::kFixedLastToken:
    case MaskKind::kFixedCurrentToken: return fixed_mask(spec.kind, T);
  }
  throw std::invalid_argument("sample_mask: bad kind");
}

// Gather the unmasked tokens in temporal order. Feature masks zero masked
// cells in place and keep every token.
template <class Scalar>
std::pair<Tensor<Scalar>, std::vector<int>> apply_mask(
    const Tensor<Scalar>& window, const Mask& mask) {
  const int T = static_cast<int>(window.rows());
  if (static_cast<int>(mask.time_mask.size()) != T)
    throw std::invalid_argument("apply_mask: mask length != window rows");
  if (mask.feature_mask) {
    const auto& fm = *mask.feature_mask;
    if (static_cast<Eigen::Index>(fm.size()) != window.size())
      throw std::invalid_argument("apply_mask: feature mask size mismatch");
    Mat<Scalar> zeroed = window.value();
    const Eigen::Index D = window.cols();
    for (Eigen::Index i = 0; i < window.rows(); ++i)
      for (Eigen::Index j = 0; j < D; ++j)
        if (fm[static_cast<std::size_t>(i * D + j)]) zeroed(i, j) = Scalar(0);
    std::vector<int> positions(static_cast<std::size_t>(T));
    std::iota(positions.begin(), positions.end(), 0);
    Tensor<Scalar> kept = detail::make_op<Scalar>(
        std::move(zeroed), {window}, [fm](TensorNode<Scalar>& self) {
          auto& p = *self.parents[0];
          p.ensure_grad();
          const Eigen::Index D = p.value.cols();
          for (Eigen::Index i = 0; i < p.value.rows(); ++i)
            for (Eigen::Index j = 0; j < D; ++j)
              if (!fm[static_cast<std::size_t>(i * D + j)])
                p.grad(i, j) += self.grad(i, j);
        });
    return {kept, positions};
  }
  std::vector<int> positions;
  for (int i = 0; i < T; ++i)
    if (!mask.time_mask[static_cast<std::size_t>(i)]) positions.push_back(i);
  if (positions.empty()) {
    // Only legal for a length-1 window (the no-context current-token case).
    if (T >= 2)
      throw std::invalid_argument("apply_mask: all tokens masked with T >= 2");
    return {Tensor<Scalar>(Mat<Scalar>(0, window.cols())), positions};
  }
  return {gather_rows(window, positions), positions};
}

}  // namespace mimex
