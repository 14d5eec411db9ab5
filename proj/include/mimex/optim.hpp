#pragma once

#include "mimex/tensor.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace mimex {

// Adam with bias correction. Moments are allocated lazily on the first step
// and keyed by parameter order, which is fixed for the life of the model.
template <class Scalar>
class Adam {
 public:
  explicit Adam(Scalar lr = Scalar(1e-4), Scalar beta1 = Scalar(0.9),
                Scalar beta2 = Scalar(0.999), Scalar eps = Scalar(1e-8))
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(std::vector<Tensor<Scalar>>& params) {
    if (m_.empty()) {
      for (auto& p : params) {
        m_.push_back(Mat<Scalar>::Zero(p.rows(), p.cols()));
        v_.push_back(Mat<Scalar>::Zero(p.rows(), p.cols()));
      }
    }
    if (params.size() != m_.size())
      throw std::invalid_argument("adam: parameter count changed");
    ++step_count_;
    const Scalar bc1 = Scalar(1) - std::pow(beta1_, Scalar(step_count_));
    const Scalar bc2 = Scalar(1) - std::pow(beta2_, Scalar(step_count_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& p = params[i];
      const Mat<Scalar>& g = p.grad();
      if (g.rows() != p.rows() || g.cols() != p.cols())
        throw std::invalid_argument("adam: grad/param shape mismatch");
      m_[i] = beta1_ * m_[i] + (Scalar(1) - beta1_) * g;
      v_[i] = (beta2_ * v_[i].array() +
               (Scalar(1) - beta2_) * g.array().square())
                  .matrix();
      const auto mhat = m_[i].array() / bc1;
      const auto vhat = v_[i].array() / bc2;
      p.value().array() -= lr_ * mhat / (vhat.sqrt() + eps_);
    }
  }

  long step_count() const { return step_count_; }
  Scalar learning_rate() const { return lr_; }
  void set_learning_rate(Scalar lr) { lr_ = lr; }

 private:
  Scalar lr_, beta1_, beta2_, eps_;
  long step_count_ = 0;
  std::vector<Mat<Scalar>> m_, v_;
};

template <class Scalar>
void zero_grads(std::vector<Tensor<Scalar>>& params) {
  for (auto& p : params) p.zero_grad();
}

}  // namespace mimex
