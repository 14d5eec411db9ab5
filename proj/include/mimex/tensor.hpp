#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace mimex {

template <class Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Global autograd switch. Forward passes made while grad mode is off build no
// graph, which keeps reward queries cheap.
inline bool& grad_mode() {
  thread_local bool enabled = true;
  return enabled;
}

struct NoGradGuard {
  bool prev;
  NoGradGuard() : prev(grad_mode()) { grad_mode() = false; }
  ~NoGradGuard() { grad_mode() = prev; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

namespace detail {
inline std::string shape_str(Eigen::Index r, Eigen::Index c) {
  std::ostringstream os;
  os << "[" << r << "x" << c << "]";
  return os.str();
}
}  // namespace detail

template <class Scalar>
struct TensorNode {
  Mat<Scalar> value;
  Mat<Scalar> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backward;

  void ensure_grad() {
    if (grad.size() == 0) grad = Mat<Scalar>::Zero(value.rows(), value.cols());
  }
};

// Dense 2-D tensor with reverse-mode autodiff. Value semantics on the handle;
// copies share the underlying node (and therefore the gradient accumulator).
// Vectors are 1xN rows, scalars are 1x1.
template <class Scalar>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Mat<Scalar> v, bool requires_grad = false)
      : node_(std::make_shared<TensorNode<Scalar>>()) {
    node_->value = std::move(v);
    node_->requires_grad = requires_grad;
  }

  static Tensor scalar(Scalar v, bool requires_grad = false) {
    Mat<Scalar> m(1, 1);
    m(0, 0) = v;
    return Tensor(std::move(m), requires_grad);
  }

  bool defined() const { return static_cast<bool>(node_); }
  const Mat<Scalar>& value() const { return node_->value; }
  Mat<Scalar>& value() { return node_->value; }
  const Mat<Scalar>& grad() const {
    node_->ensure_grad();
    return node_->grad;
  }
  bool requires_grad() const { return node_->requires_grad; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  Eigen::Index size() const { return node_->value.size(); }
  Scalar item() const {
    if (node_->value.size() != 1)
      throw std::invalid_argument("item() on non-scalar tensor " +
                                  detail::shape_str(rows(), cols()));
    return node_->value(0, 0);
  }

  void zero_grad() {
    if (node_->grad.size() != 0) node_->grad.setZero();
  }

  // Same value, no graph history. Used to stop gradients at module borders.
  Tensor detach() const { return Tensor(node_->value, false); }

  std::shared_ptr<TensorNode<Scalar>> node() const { return node_; }

 private:
  std::shared_ptr<TensorNode<Scalar>> node_;
};

namespace detail {

template <class Scalar>
Tensor<Scalar> make_op(Mat<Scalar> value, std::vector<Tensor<Scalar>> parents,
                       std::function<void(TensorNode<Scalar>&)> backward) {
  Tensor<Scalar> out(std::move(value));
  if (!grad_mode()) return out;
  bool needs = false;
  for (const auto& p : parents) {
    if (p.node()->requires_grad) {
      needs = true;
      break;
    }
  }
  if (!needs) return out;
  auto n = out.node();
  n->requires_grad = true;
  n->parents.reserve(parents.size());
  for (const auto& p : parents) n->parents.push_back(p.node());
  n->backward = std::move(backward);
  return out;
}

template <class Scalar>
void accum(TensorNode<Scalar>& n, const Mat<Scalar>& g) {
  n.ensure_grad();
  n.grad += g;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// primitives

template <class Scalar>
Tensor<Scalar> matmul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.cols() != b.rows())
    throw std::invalid_argument("matmul: inner dimensions disagree: " +
                                detail::shape_str(a.rows(), a.cols()) + " x " +
                                detail::shape_str(b.rows(), b.cols()));
  Mat<Scalar> v = a.value() * b.value();
  return detail::make_op<Scalar>(
      std::move(v), {a, b}, [](TensorNode<Scalar>& self) {
        const Mat<Scalar>& g = self.grad;
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        if (pa.requires_grad || !pa.parents.empty())
          detail::accum<Scalar>(pa, g * pb.value.transpose());
        if (pb.requires_grad || !pb.parents.empty())
          detail::accum<Scalar>(pb, pa.value.transpose() * g);
      });
}

// a * b^T, used for attention scores
template <class Scalar>
Tensor<Scalar> matmul_nt(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.cols() != b.cols())
    throw std::invalid_argument("matmul_nt: last dimensions disagree: " +
                                detail::shape_str(a.rows(), a.cols()) + " x " +
                                detail::shape_str(b.rows(), b.cols()) + "^T");
  Mat<Scalar> v = a.value() * b.value().transpose();
  return detail::make_op<Scalar>(
      std::move(v), {a, b}, [](TensorNode<Scalar>& self) {
        const Mat<Scalar>& g = self.grad;
        detail::accum<Scalar>(*self.parents[0], g * self.parents[1]->value);
        detail::accum<Scalar>(*self.parents[1],
                              g.transpose() * self.parents[0]->value);
      });
}

template <class Scalar>
Tensor<Scalar> add(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("add: shape mismatch " +
                                detail::shape_str(a.rows(), a.cols()) + " vs " +
                                detail::shape_str(b.rows(), b.cols()));
  Mat<Scalar> v = a.value() + b.value();
  return detail::make_op<Scalar>(std::move(v), {a, b},
                                 [](TensorNode<Scalar>& self) {
                                   detail::accum<Scalar>(*self.parents[0], self.grad);
                                   detail::accum<Scalar>(*self.parents[1], self.grad);
                                 });
}

template <class Scalar>
Tensor<Scalar> sub(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("sub: shape mismatch " +
                                detail::shape_str(a.rows(), a.cols()) + " vs " +
                                detail::shape_str(b.rows(), b.cols()));
  Mat<Scalar> v = a.value() - b.value();
  return detail::make_op<Scalar>(
      std::move(v), {a, b}, [](TensorNode<Scalar>& self) {
        detail::accum<Scalar>(*self.parents[0], self.grad);
        detail::accum<Scalar>(*self.parents[1], Mat<Scalar>(-self.grad));
      });
}

// elementwise product
template <class Scalar>
Tensor<Scalar> mul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("mul: shape mismatch " +
                                detail::shape_str(a.rows(), a.cols()) + " vs " +
                                detail::shape_str(b.rows(), b.cols()));
  Mat<Scalar> v = a.value().cwiseProduct(b.value());
  return detail::make_op<Scalar>(
      std::move(v), {a, b}, [](TensorNode<Scalar>& self) {
        detail::accum<Scalar>(*self.parents[0],
                              self.grad.cwiseProduct(self.parents[1]->value));
        detail::accum<Scalar>(*self.parents[1],
                              self.grad.cwiseProduct(self.parents[0]->value));
      });
}

template <class Scalar>
Tensor<Scalar> scale(const Tensor<Scalar>& a, Scalar s) {
  Mat<Scalar> v = a.value() * s;
  return detail::make_op<Scalar>(std::move(v), {a},
                                 [s](TensorNode<Scalar>& self) {
                                   detail::accum<Scalar>(*self.parents[0],
                                                         Mat<Scalar>(self.grad * s));
                                 });
}

// elementwise multiply by a constant (no-grad) matrix
template <class Scalar>
Tensor<Scalar> mul_const(const Tensor<Scalar>& a, const Mat<Scalar>& m) {
  if (a.rows() != m.rows() || a.cols() != m.cols())
    throw std::invalid_argument("mul_const: shape mismatch");
  Mat<Scalar> v = a.value().cwiseProduct(m);
  return detail::make_op<Scalar>(std::move(v), {a},
                                 [m](TensorNode<Scalar>& self) {
                                   detail::accum<Scalar>(*self.parents[0],
                                                         Mat<Scalar>(self.grad.cwiseProduct(m)));
                                 });
}

// add a constant (no-grad) matrix, e.g. positional embeddings
template <class Scalar>
Tensor<Scalar> add_const(const Tensor<Scalar>& a, const Mat<Scalar>& m) {
  if (a.rows() != m.rows() || a.cols() != m.cols())
    throw std::invalid_argument("add_const: shape mismatch");
  Mat<Scalar> v = a.value() + m;
  return detail::make_op<Scalar>(std::move(v), {a},
                                 [](TensorNode<Scalar>& self) {
                                   detail::accum<Scalar>(*self.parents[0], self.grad);
                                 });
}

// broadcast a 1xC row over all rows of a
template <class Scalar>
Tensor<Scalar> add_rowvec(const Tensor<Scalar>& a, const Tensor<Scalar>& r) {
  if (r.rows() != 1 || r.cols() != a.cols())
    throw std::invalid_argument("add_rowvec: want 1x" + std::to_string(a.cols()) +
                                ", got " + detail::shape_str(r.rows(), r.cols()));
  Mat<Scalar> v = a.value().rowwise() + r.value().row(0);
  return detail::make_op<Scalar>(
      std::move(v), {a, r}, [](TensorNode<Scalar>& self) {
        detail::accum<Scalar>(*self.parents[0], self.grad);
        detail::accum<Scalar>(*self.parents[1],
                              Mat<Scalar>(self.grad.colwise().sum()));
      });
}

template <class Scalar>
Tensor<Scalar> mul_rowvec(const Tensor<Scalar>& a, const Tensor<Scalar>& r) {
  if (r.rows() != 1 || r.cols() != a.cols())
    throw std::invalid_argument("mul_rowvec: want 1x" + std::to_string(a.cols()) +
                                ", got " + detail::shape_str(r.rows(), r.cols()));
  Mat<Scalar> v = a.value().array().rowwise() * r.value().row(0).array();
  return detail::make_op<Scalar>(
      std::move(v), {a, r}, [](TensorNode<Scalar>& self) {
        const auto& av = self.parents[0]->value;
        const auto& rv = self.parents[1]->value;
        detail::accum<Scalar>(
            *self.parents[0],
            Mat<Scalar>(self.grad.array().rowwise() * rv.row(0).array()));
        detail::accum<Scalar>(
            *self.parents[1],
            Mat<Scalar>(self.grad.cwiseProduct(av).colwise().sum()));
      });
}

template <class Scalar>
Tensor<Scalar> exp(const Tensor<Scalar>& a) {
  Mat<Scalar> v = a.value().array().exp();
  return detail::make_op<Scalar>(std::move(v), {a},
                                 [](TensorNode<Scalar>& self) {
                                   detail::accum<Scalar>(*self.parents[0],
                                                         Mat<Scalar>(self.grad.cwiseProduct(self.value)));
                                 });
}

// GELU, tanh approximation:
//   0.5 * x * (1 + tanh(sqrt(2/pi) * (x + 0.044715 x^3)))
template <class Scalar>
Tensor<Scalar> gelu(const Tensor<Scalar>& a) {
  const Scalar c = static_cast<Scalar>(std::sqrt(2.0 / std::numbers::pi));
  const Scalar k = static_cast<Scalar>(0.044715);
  Mat<Scalar> v(a.rows(), a.cols());
  const auto& x = a.value();
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const Scalar xi = x(i);
    v(i) = Scalar(0.5) * xi *
           (Scalar(1) + std::tanh(c * (xi + k * xi * xi * xi)));
  }
  return detail::make_op<Scalar>(
      std::move(v), {a}, [c, k](TensorNode<Scalar>& self) {
        const auto& x = self.parents[0]->value;
        Mat<Scalar> dx(x.rows(), x.cols());
        for (Eigen::Index i = 0; i < x.size(); ++i) {
          const Scalar xi = x(i);
          const Scalar u = c * (xi + k * xi * xi * xi);
          const Scalar th = std::tanh(u);
          const Scalar sech2 = Scalar(1) - th * th;
          const Scalar du = c * (Scalar(1) + Scalar(3) * k * xi * xi);
          dx(i) = Scalar(0.5) * (Scalar(1) + th) +
                  Scalar(0.5) * xi * sech2 * du;
        }
        detail::accum<Scalar>(*self.parents[0],
                              Mat<Scalar>(self.grad.cwiseProduct(dx)));
      });
}

template <class Scalar>
Tensor<Scalar> tanh(const Tensor<Scalar>& a) {
  Mat<Scalar> v = a.value().array().tanh();
  return detail::make_op<Scalar>(
      std::move(v), {a}, [](TensorNode<Scalar>& self) {
        Mat<Scalar> d = (Scalar(1) - self.value.array().square()).matrix();
        detail::accum<Scalar>(*self.parents[0],
                              Mat<Scalar>(self.grad.cwiseProduct(d)));
      });
}

// rowwise softmax, max-subtracted
template <class Scalar>
Tensor<Scalar> softmax(const Tensor<Scalar>& a) {
  if (a.cols() < 1) throw std::invalid_argument("softmax: empty rows");
  Mat<Scalar> v(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const Scalar m = a.value().row(i).maxCoeff();
    Eigen::Array<Scalar, 1, Eigen::Dynamic> e =
        (a.value().row(i).array() - m).exp();
    v.row(i) = (e / e.sum()).matrix();
  }
  return detail::make_op<Scalar>(
      std::move(v), {a}, [](TensorNode<Scalar>& self) {
        Mat<Scalar> dx(self.value.rows(), self.value.cols());
        for (Eigen::Index i = 0; i < self.value.rows(); ++i) {
          const Scalar dot = self.grad.row(i).dot(self.value.row(i));
          dx.row(i) = self.value.row(i).cwiseProduct(
              (self.grad.row(i).array() - dot).matrix());
        }
        detail::accum<Scalar>(*self.parents[0], dx);
      });
}

// rowwise log-softmax
template <class Scalar>
Tensor<Scalar> log_softmax(const Tensor<Scalar>& a) {
  if (a.cols() < 1) throw std::invalid_argument("log_softmax: empty rows");
  Mat<Scalar> v(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const Scalar m = a.value().row(i).maxCoeff();
    const Scalar lse =
        m + std::log((a.value().row(i).array() - m).exp().sum());
    v.row(i) = (a.value().row(i).array() - lse).matrix();
  }
  return detail::make_op<Scalar>(
      std::move(v), {a}, [](TensorNode<Scalar>& self) {
        Mat<Scalar> dx(self.value.rows(), self.value.cols());
        for (Eigen::Index i = 0; i < self.value.rows(); ++i) {
          const Scalar gsum = self.grad.row(i).sum();
          dx.row(i) = self.grad.row(i) -
                      (self.value.row(i).array().exp() * gsum).matrix();
        }
        detail::accum<Scalar>(*self.parents[0], dx);
      });
}

// layer norm over the last axis (population variance), then gain and bias
template <class Scalar>
Tensor<Scalar> layer_norm(const Tensor<Scalar>& x, const Tensor<Scalar>& gain,
                          const Tensor<Scalar>& bias, Scalar eps) {
  const Eigen::Index d = x.cols();
  if (gain.rows() != 1 || gain.cols() != d || bias.rows() != 1 || bias.cols() != d)
    throw std::invalid_argument("layer_norm: gain/bias must be 1x" +
                                std::to_string(d));
  if (eps <= Scalar(0)) throw std::invalid_argument("layer_norm: eps must be > 0");
  Mat<Scalar> y(x.rows(), d);
  Mat<Scalar> inv_sigma(x.rows(), 1);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Scalar mean = x.value().row(i).mean();
    const Scalar var =
        (x.value().row(i).array() - mean).square().sum() / Scalar(d);
    const Scalar is = Scalar(1) / std::sqrt(var + eps);
    inv_sigma(i, 0) = is;
    y.row(i) = ((x.value().row(i).array() - mean) * is).matrix();
  }
  Mat<Scalar> v = (y.array().rowwise() * gain.value().row(0).array()).matrix();
  v.rowwise() += bias.value().row(0);
  return detail::make_op<Scalar>(
      std::move(v), {x, gain, bias},
      [y, inv_sigma](TensorNode<Scalar>& self) {
        const auto& g = self.grad;
        const auto& gamma = self.parents[1]->value;
        const Eigen::Index d = y.cols();
        Mat<Scalar> dx(y.rows(), d);
        for (Eigen::Index i = 0; i < y.rows(); ++i) {
          Eigen::Array<Scalar, 1, Eigen::Dynamic> gy =
              g.row(i).array() * gamma.row(0).array();
          const Scalar m1 = gy.sum() / Scalar(d);
          const Scalar m2 = (gy * y.row(i).array()).sum() / Scalar(d);
          dx.row(i) =
              ((gy - m1 - y.row(i).array() * m2) * inv_sigma(i, 0)).matrix();
        }
        detail::accum<Scalar>(*self.parents[0], dx);
        detail::accum<Scalar>(*self.parents[1],
                              Mat<Scalar>(g.cwiseProduct(y).colwise().sum()));
        detail::accum<Scalar>(*self.parents[2],
                              Mat<Scalar>(g.colwise().sum()));
      });
}

template <class Scalar>
Tensor<Scalar> sum_all(const Tensor<Scalar>& a) {
  Mat<Scalar> v(1, 1);
  v(0, 0) = a.value().sum();
  return detail::make_op<Scalar>(
      std::move(v), {a}, [](TensorNode<Scalar>& self) {
        const Scalar g = self.grad(0, 0);
        auto& p = *self.parents[0];
        detail::accum<Scalar>(
            p, Mat<Scalar>(Mat<Scalar>::Constant(p.value.rows(), p.value.cols(), g)));
      });
}

template <class Scalar>
Tensor<Scalar> mean_all(const Tensor<Scalar>& a) {
  const Scalar n = static_cast<Scalar>(a.size());
  return scale(sum_all(a), Scalar(1) / n);
}

// rowwise sum -> Lx1
template <class Scalar>
Tensor<Scalar> sum_rows(const Tensor<Scalar>& a) {
  Mat<Scalar> v = a.value().rowwise().sum();
  return detail::make_op<Scalar>(
      std::move(v), {a}, [](TensorNode<Scalar>& self) {
        auto& p = *self.parents[0];
        Mat<Scalar> g(p.value.rows(), p.value.cols());
        for (Eigen::Index i = 0; i < g.rows(); ++i)
          g.row(i).setConstant(self.grad(i, 0));
        detail::accum<Scalar>(p, g);
      });
}

template <class Scalar>
Tensor<Scalar> slice_cols(const Tensor<Scalar>& a, Eigen::Index start,
                          Eigen::Index n) {
  if (start < 0 || n < 1 || start + n > a.cols())
    throw std::invalid_argument("slice_cols: out of range");
  Mat<Scalar> v = a.value().middleCols(start, n);
  return detail::make_op<Scalar>(
      std::move(v), {a}, [start, n](TensorNode<Scalar>& self) {
        auto& p = *self.parents[0];
        p.ensure_grad();
        p.grad.middleCols(start, n) += self.grad;
      });
}

template <class Scalar>
Tensor<Scalar> concat_cols(const std::vector<Tensor<Scalar>>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: empty input");
  Eigen::Index cols = 0;
  const Eigen::Index rows = parts[0].rows();
  for (const auto& p : parts) {
    if (p.rows() != rows) throw std::invalid_argument("concat_cols: row mismatch");
    cols += p.cols();
  }
  Mat<Scalar> v(rows, cols);
  std::vector<Eigen::Index> offsets;
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    v.middleCols(off, p.cols()) = p.value();
    offsets.push_back(off);
    off += p.cols();
  }
  return detail::make_op<Scalar>(
      std::move(v), parts, [offsets](TensorNode<Scalar>& self) {
        for (std::size_t k = 0; k < self.parents.size(); ++k) {
          auto& p = *self.parents[k];
          p.ensure_grad();
          p.grad += self.grad.middleCols(offsets[k], p.value.cols());
        }
      });
}

template <class Scalar>
Tensor<Scalar> concat_rows(const std::vector<Tensor<Scalar>>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: empty input");
  Eigen::Index rows = 0;
  const Eigen::Index cols = parts[0].cols();
  for (const auto& p : parts) {
    if (p.cols() != cols) throw std::invalid_argument("concat_rows: col mismatch");
    rows += p.rows();
  }
  Mat<Scalar> v(rows, cols);
  std::vector<Eigen::Index> offsets;
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    v.middleRows(off, p.rows()) = p.value();
    offsets.push_back(off);
    off += p.rows();
  }
  return detail::make_op<Scalar>(
      std::move(v), parts, [offsets](TensorNode<Scalar>& self) {
        for (std::size_t k = 0; k < self.parents.size(); ++k) {
          auto& p = *self.parents[k];
          p.ensure_grad();
          p.grad += self.grad.middleRows(offsets[k], p.value.rows());
        }
      });
}

template <class Scalar>
Tensor<Scalar> gather_rows(const Tensor<Scalar>& a,
                           const std::vector<int>& indices) {
  if (indices.empty()) throw std::invalid_argument("gather_rows: empty index set");
  for (int i : indices)
    if (i < 0 || i >= a.rows())
      throw std::invalid_argument("gather_rows: index out of range");
  Mat<Scalar> v(static_cast<Eigen::Index>(indices.size()), a.cols());
  for (std::size_t k = 0; k < indices.size(); ++k)
    v.row(static_cast<Eigen::Index>(k)) = a.value().row(indices[k]);
  return detail::make_op<Scalar>(
      std::move(v), {a}, [indices](TensorNode<Scalar>& self) {
        auto& p = *self.parents[0];
        p.ensure_grad();
        for (std::size_t k = 0; k < indices.size(); ++k)
          p.grad.row(indices[k]) += self.grad.row(static_cast<Eigen::Index>(k));
      });
}

// Scatter kept rows back to a full-length sequence, filling masked slots with
// a single learnable row. time_mask[i] == true means slot i is masked; the
// number of false entries must equal latents.rows().
template <class Scalar>
Tensor<Scalar> assemble_rows(const Tensor<Scalar>& latents,
                             const Tensor<Scalar>& fill_row,
                             const std::vector<bool>& time_mask) {
  const Eigen::Index T = static_cast<Eigen::Index>(time_mask.size());
  Eigen::Index kept = 0;
  for (bool m : time_mask)
    if (!m) ++kept;
  if (kept != latents.rows())
    throw std::invalid_argument(
        "assemble_rows: kept count " + std::to_string(kept) +
        " != latent rows " + std::to_string(latents.rows()));
  if (fill_row.rows() != 1 || fill_row.cols() != latents.cols())
    throw std::invalid_argument("assemble_rows: fill row shape mismatch");
  Mat<Scalar> v(T, latents.cols());
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < T; ++i) {
    if (time_mask[static_cast<std::size_t>(i)])
      v.row(i) = fill_row.value().row(0);
    else
      v.row(i) = latents.value().row(k++);
  }
  return detail::make_op<Scalar>(
      std::move(v), {latents, fill_row},
      [time_mask](TensorNode<Scalar>& self) {
        auto& lat = *self.parents[0];
        auto& fill = *self.parents[1];
        lat.ensure_grad();
        fill.ensure_grad();
        Eigen::Index k = 0;
        for (Eigen::Index i = 0; i < self.value.rows(); ++i) {
          if (time_mask[static_cast<std::size_t>(i)])
            fill.grad.row(0) += self.grad.row(i);
          else
            lat.grad.row(k++) += self.grad.row(i);
        }
      });
}

// Mean squared error over all cells.
template <class Scalar>
Tensor<Scalar> mse(const Tensor<Scalar>& pred, const Tensor<Scalar>& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw std::invalid_argument("mse: shape mismatch " +
                                detail::shape_str(pred.rows(), pred.cols()) +
                                " vs " +
                                detail::shape_str(target.rows(), target.cols()));
  Mat<Scalar> diff = pred.value() - target.value();
  Mat<Scalar> v(1, 1);
  v(0, 0) = diff.array().square().sum() / static_cast<Scalar>(diff.size());
  return detail::make_op<Scalar>(
      std::move(v), {pred, target}, [diff](TensorNode<Scalar>& self) {
        const Scalar g = self.grad(0, 0) * Scalar(2) /
                         static_cast<Scalar>(diff.size());
        detail::accum<Scalar>(*self.parents[0], Mat<Scalar>(diff * g));
        detail::accum<Scalar>(*self.parents[1], Mat<Scalar>(diff * (-g)));
      });
}

// Mean squared error over masked rows only (all feature dims of those rows).
// Unmasked rows contribute exactly zero.
template <class Scalar>
Tensor<Scalar> masked_mse(const Tensor<Scalar>& pred,
                          const Tensor<Scalar>& target,
                          const std::vector<bool>& row_mask) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw std::invalid_argument("masked_mse: shape mismatch " +
                                detail::shape_str(pred.rows(), pred.cols()) +
                                " vs " +
                                detail::shape_str(target.rows(), target.cols()));
  if (static_cast<Eigen::Index>(row_mask.size()) != pred.rows())
    throw std::invalid_argument("masked_mse: mask length mismatch");
  Eigen::Index masked = 0;
  for (bool m : row_mask)
    if (m) ++masked;
  if (masked == 0)
    throw std::invalid_argument("masked_mse: mask selects no rows");
  const Scalar count = static_cast<Scalar>(masked * pred.cols());
  Mat<Scalar> diff = Mat<Scalar>::Zero(pred.rows(), pred.cols());
  Scalar s = 0;
  for (Eigen::Index i = 0; i < pred.rows(); ++i) {
    if (!row_mask[static_cast<std::size_t>(i)]) continue;
    diff.row(i) = pred.value().row(i) - target.value().row(i);
    s += diff.row(i).array().square().sum();
  }
  Mat<Scalar> v(1, 1);
  v(0, 0) = s / count;
  return detail::make_op<Scalar>(
      std::move(v), {pred, target}, [diff, count](TensorNode<Scalar>& self) {
        const Scalar g = self.grad(0, 0) * Scalar(2) / count;
        detail::accum<Scalar>(*self.parents[0], Mat<Scalar>(diff * g));
        detail::accum<Scalar>(*self.parents[1], Mat<Scalar>(diff * (-g)));
      });
}

// Cell-level variant for feature-dimension masks.
template <class Scalar>
Tensor<Scalar> masked_mse_cells(const Tensor<Scalar>& pred,
                                const Tensor<Scalar>& target,
                                const std::vector<bool>& cell_mask) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw std::invalid_argument("masked_mse_cells: shape mismatch");
  if (static_cast<Eigen::Index>(cell_mask.size()) != pred.size())
    throw std::invalid_argument("masked_mse_cells: mask length mismatch");
  Eigen::Index masked = 0;
  for (bool m : cell_mask)
    if (m) ++masked;
  if (masked == 0)
    throw std::invalid_argument("masked_mse_cells: mask selects no cells");
  const Scalar count = static_cast<Scalar>(masked);
  Mat<Scalar> diff = Mat<Scalar>::Zero(pred.rows(), pred.cols());
  Scalar s = 0;
  const Eigen::Index C = pred.cols();
  for (Eigen::Index i = 0; i < pred.rows(); ++i) {
    for (Eigen::Index j = 0; j < C; ++j) {
      if (!cell_mask[static_cast<std::size_t>(i * C + j)]) continue;
      const Scalar d = pred.value()(i, j) - target.value()(i, j);
      diff(i, j) = d;
      s += d * d;
    }
  }
  Mat<Scalar> v(1, 1);
  v(0, 0) = s / count;
  return detail::make_op<Scalar>(
      std::move(v), {pred, target}, [diff, count](TensorNode<Scalar>& self) {
        const Scalar g = self.grad(0, 0) * Scalar(2) / count;
        detail::accum<Scalar>(*self.parents[0], Mat<Scalar>(diff * g));
        detail::accum<Scalar>(*self.parents[1], Mat<Scalar>(diff * (-g)));
      });
}

// ---------------------------------------------------------------------------
// backward

// Reverse-mode sweep from a scalar loss. Gradients of leaf tensors accumulate
// across calls; zeroing is the caller's responsibility.
template <class Scalar>
void backward(const Tensor<Scalar>& loss) {
  if (loss.size() != 1)
    throw std::invalid_argument("backward: loss must be scalar, got " +
                                detail::shape_str(loss.rows(), loss.cols()));
  using NodePtr = TensorNode<Scalar>*;
  std::vector<NodePtr> topo;
  std::unordered_set<NodePtr> visited;
  // iterative post-order DFS
  std::vector<std::pair<NodePtr, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [n, idx] = stack.back();
    if (idx < n->parents.size()) {
      NodePtr p = n->parents[idx].get();
      ++idx;
      if (!visited.count(p) && (!p->parents.empty() || p->requires_grad)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      topo.push_back(n);
      stack.pop_back();
    }
  }
  // interior grads are scratch space for this sweep; only leaves accumulate
  for (NodePtr n : topo) {
    if (!n->parents.empty()) {
      n->ensure_grad();
      n->grad.setZero();
    }
  }
  loss.node()->ensure_grad();
  loss.node()->grad(0, 0) += Scalar(1);
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    NodePtr n = *it;
    if (n->backward) n->backward(*n);
  }
}

}  // namespace mimex
