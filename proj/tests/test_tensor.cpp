#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gradcheck.hpp"
#include "mimex/optim.hpp"
#include "mimex/rng.hpp"
#include "mimex/tensor.hpp"

#include <cmath>

using namespace mimex;

namespace {

Mat<double> random_mat(Eigen::Index r, Eigen::Index c, Rng& rng) {
  Mat<double> m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = rng.normal();
  return m;
}

}  // namespace

TEST_CASE("matmul identity and hand arithmetic") {
  Mat<float> eye = Mat<float>::Identity(2, 2);
  Mat<float> a(2, 2);
  a << 1, 2, 3, 4;
  Tensor<float> r = matmul(Tensor<float>(eye), Tensor<float>(a));
  CHECK(r.value() == a);

  Mat<float> row(1, 2), col(2, 1);
  row << 1, 2;
  col << 3, 4;
  CHECK(matmul(Tensor<float>(row), Tensor<float>(col)).item() == doctest::Approx(11));
}

TEST_CASE("matmul shape mismatch names both shapes") {
  Tensor<float> a(Mat<float>::Zero(2, 3));
  Tensor<float> b(Mat<float>::Zero(2, 3));
  CHECK_THROWS_WITH_AS(matmul(a, b),
                       doctest::Contains("[2x3]"), std::invalid_argument);
}

TEST_CASE("matmul gradient vs central finite differences") {
  Rng rng(7);
  Tensor<double> a(random_mat(3, 4, rng), true);
  Tensor<double> b(random_mat(4, 2, rng), true);
  Mat<double> w = random_mat(3, 2, rng);  // random weighting makes loss scalar
  auto f = [&] { return sum_all(mul_const(matmul(a, b), w)); };
  auto res = gradcheck::check(f, {a, b});
  CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("softmax symmetry and stability") {
  Mat<float> x(1, 2);
  x << 0, 0;
  Tensor<float> s = softmax(Tensor<float>(x));
  CHECK(s.value()(0, 0) == doctest::Approx(0.5));
  CHECK(s.value()(0, 1) == doctest::Approx(0.5));

  Mat<float> big(1, 2);
  big << 1000, 0;
  Tensor<float> sb = softmax(Tensor<float>(big));
  CHECK(std::isfinite(sb.value()(0, 0)));
  CHECK(sb.value()(0, 0) == doctest::Approx(1.0));
  CHECK(sb.value()(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("softmax rows sum to one for random inputs") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor<double> x(random_mat(4, 6, rng).array() * 10.0);
    Mat<double> s = softmax(x).value();
    for (Eigen::Index i = 0; i < s.rows(); ++i)
      CHECK(std::abs(s.row(i).sum() - 1.0) < 1e-9);
  }
}

TEST_CASE("softmax gradient check") {
  Rng rng(11);
  Tensor<double> x(random_mat(2, 5, rng), true);
  Mat<double> w = random_mat(2, 5, rng);
  auto f = [&] { return sum_all(mul_const(softmax(x), w)); };
  CHECK(gradcheck::check(f, {x}).max_rel_err < 1e-4);
}

TEST_CASE("layer_norm basic values") {
  Mat<float> x(1, 2);
  x << 1, 3;
  Tensor<float> gain(Mat<float>::Ones(1, 2));
  Tensor<float> bias(Mat<float>::Zero(1, 2));
  Tensor<float> y = layer_norm(Tensor<float>(x), gain, bias, 1e-12f);
  CHECK(y.value()(0, 0) == doctest::Approx(-1).epsilon(1e-4));
  CHECK(y.value()(0, 1) == doctest::Approx(1).epsilon(1e-4));

  // constant row: zero variance absorbed by eps, output = bias
  Mat<float> c = Mat<float>::Constant(1, 4, 2.5f);
  Mat<float> b2(1, 4);
  b2 << 1, 2, 3, 4;
  Tensor<float> y2 = layer_norm(Tensor<float>(c), Tensor<float>(Mat<float>::Ones(1, 4)),
                                Tensor<float>(b2), 1e-5f);
  for (int j = 0; j < 4; ++j)
    CHECK(y2.value()(0, j) == doctest::Approx(b2(0, j)));
}

TEST_CASE("layer_norm gradient check") {
  Rng rng(17);
  Tensor<double> x(random_mat(3, 4, rng), true);
  Tensor<double> g(random_mat(1, 4, rng), true);
  Tensor<double> b(random_mat(1, 4, rng), true);
  Mat<double> w = random_mat(3, 4, rng);
  auto f = [&] { return sum_all(mul_const(layer_norm(x, g, b, 1e-5), w)); };
  CHECK(gradcheck::check(f, {x, g, b}).max_rel_err < 1e-4);
}

TEST_CASE("gelu values and gradient") {
  CHECK(gelu(Tensor<float>::scalar(0)).item() == doctest::Approx(0));
  CHECK(gelu(Tensor<float>::scalar(10)).item() == doctest::Approx(10).epsilon(1e-4));

  Rng rng(23);
  Tensor<double> x(random_mat(1, 8, rng), true);
  Mat<double> w = random_mat(1, 8, rng);
  auto f = [&] { return sum_all(mul_const(gelu(x), w)); };
  CHECK(gradcheck::check(f, {x}).max_rel_err < 1e-4);
}

TEST_CASE("masked_mse contract") {
  Mat<float> p(2, 2), t(2, 2);
  p << 1, 1, 0, 0;
  t << 0, 0, 9, 9;
  Tensor<float> pred(p), target(t);

  // identical inputs -> 0
  CHECK(masked_mse(pred, pred, {true, true}).item() == doctest::Approx(0));

  // only row 0 counts: mean of (1,1) squared errors
  CHECK(masked_mse(pred, target, {true, false}).item() == doctest::Approx(1.0));

  // perturbing an unmasked row leaves the loss bit-for-bit unchanged
  const float before = masked_mse(pred, target, {true, false}).item();
  Mat<float> t2 = t;
  t2(1, 0) = 12345.0f;
  const float after = masked_mse(pred, Tensor<float>(t2), {true, false}).item();
  CHECK(before == after);

  CHECK_THROWS_AS(masked_mse(pred, target, {false, false}), std::invalid_argument);
}

TEST_CASE("masked_mse invariance property over random perturbations") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    Mat<double> p = random_mat(5, 3, rng);
    Mat<double> t = random_mat(5, 3, rng);
    std::vector<bool> mask(5);
    bool any = false;
    for (auto&& m : mask) {
      bool b = rng.uniform() < 0.5;
      m = b;
      any = any || b;
    }
    if (!any) mask[0] = true;
    const double base =
        masked_mse(Tensor<double>(p), Tensor<double>(t), mask).item();
    Mat<double> t2 = t, p2 = p;
    for (int i = 0; i < 5; ++i) {
      if (!mask[static_cast<std::size_t>(i)]) {
        t2.row(i).setConstant(rng.normal() * 100);
        p2.row(i).setConstant(rng.normal() * 100);
      }
    }
    CHECK(masked_mse(Tensor<double>(p2), Tensor<double>(t2), mask).item() == base);
  }
}

TEST_CASE("backward on sum gives ones; double backward doubles") {
  Tensor<float> x(Mat<float>::Zero(1, 3), true);
  Tensor<float> loss = sum_all(x);
  backward(loss);
  for (int j = 0; j < 3; ++j) CHECK(x.grad()(0, j) == doctest::Approx(1));
  backward(loss);
  for (int j = 0; j < 3; ++j) CHECK(x.grad()(0, j) == doctest::Approx(2));
}

TEST_CASE("backward rejects non-scalar loss") {
  Tensor<float> x(Mat<float>::Zero(2, 2), true);
  CHECK_THROWS_AS(backward(add(x, x)), std::invalid_argument);
}

TEST_CASE("matmul chain gradient check") {
  Rng rng(41);
  Tensor<double> a(random_mat(2, 3, rng), true);
  Tensor<double> b(random_mat(3, 4, rng), true);
  Tensor<double> c(random_mat(4, 2, rng), true);
  auto f = [&] { return mean_all(gelu(matmul(matmul(a, b), c))); };
  CHECK(gradcheck::check(f, {a, b, c}).max_rel_err < 1e-4);
}

TEST_CASE("all primitives pass FD checks over many seeds") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    Tensor<double> x(random_mat(3, 4, rng), true);
    Tensor<double> y(random_mat(3, 4, rng), true);
    Tensor<double> r(random_mat(1, 4, rng), true);
    Mat<double> w = random_mat(3, 4, rng);
    std::vector<bool> mask = {true, false, true};

    auto fsum = [&] {
      return sum_all(mul_const(
          add(mul(tanh(x), y), mul_rowvec(add_rowvec(x, r), r)), w));
    };
    CHECK(gradcheck::check(fsum, {x, y, r}).max_rel_err < 1e-4);

    auto fmix = [&] {
      return add(masked_mse(gelu(x), y, mask),
                 mean_all(mul_const(softmax(x), w)));
    };
    CHECK(gradcheck::check(fmix, {x, y}).max_rel_err < 1e-4);

    auto fexp = [&] { return mean_all(mul_const(exp(scale(x, 0.3)), w)); };
    CHECK(gradcheck::check(fexp, {x}).max_rel_err < 1e-4);
  }
}

TEST_CASE("gather, slice, concat, assemble gradients") {
  Rng rng(5);
  Tensor<double> x(random_mat(4, 6, rng), true);
  Tensor<double> fill(random_mat(1, 6, rng), true);
  Mat<double> w = random_mat(5, 6, rng);
  std::vector<bool> mask = {true, false, true, false, true};
  auto f = [&] {
    Tensor<double> g = gather_rows(x, {0, 2});
    Tensor<double> asm_ = assemble_rows(g, fill, mask);
    std::vector<Tensor<double>> halves{slice_cols(asm_, 0, 3),
                                       slice_cols(asm_, 3, 3)};
    Tensor<double> s = concat_cols(halves);
    return sum_all(mul_const(s, w));
  };
  CHECK(gradcheck::check(f, {x, fill}).max_rel_err < 1e-4);
}

TEST_CASE("log_softmax and sum_rows gradients") {
  Rng rng(9);
  Tensor<double> x(random_mat(3, 5, rng), true);
  Mat<double> w = random_mat(3, 5, rng);
  Mat<double> wr = random_mat(3, 1, rng);
  auto f = [&] {
    return add(sum_all(mul_const(log_softmax(x), w)),
               sum_all(mul_const(sum_rows(softmax(x)), wr)));
  };
  CHECK(gradcheck::check(f, {x}).max_rel_err < 1e-4);
}

TEST_CASE("determinism: same seed, same op sequence, identical bits") {
  auto run = [] {
    Rng rng(99);
    Tensor<float> a(random_mat(4, 4, rng).cast<float>(), true);
    Tensor<float> b(random_mat(4, 4, rng).cast<float>(), true);
    Tensor<float> loss = mean_all(gelu(matmul(softmax(a), b)));
    backward(loss);
    return std::make_pair(loss.item(), Mat<float>(a.grad()));
  };
  auto [l1, g1] = run();
  auto [l2, g2] = run();
  CHECK(l1 == l2);
  CHECK(g1 == g2);
}

TEST_CASE("adam: zero grad leaves params unchanged") {
  Rng rng(1);
  std::vector<Tensor<float>> params{Tensor<float>(random_mat(2, 3, rng).cast<float>(), true)};
  Mat<float> before = params[0].value();
  Adam<float> opt(1e-2f);
  params[0].zero_grad();
  opt.step(params);
  CHECK(params[0].value() == before);
}

TEST_CASE("adam: first step matches closed form") {
  // With bias correction, step 1 moves each coordinate by
  //   lr * g / (|g| + eps')  with eps' scaled by the correction terms.
  const double lr = 1e-3, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  Mat<double> g(1, 3);
  g << 0.5, -2.0, 3.0;

  std::vector<Tensor<double>> params{Tensor<double>(Mat<double>::Zero(1, 3), true)};
  Tensor<double> loss = sum_all(mul_const(params[0], g));
  backward(loss);
  Adam<double> opt(lr, b1, b2, eps);
  opt.step(params);

  for (int j = 0; j < 3; ++j) {
    const double m_hat = (1 - b1) * g(0, j) / (1 - b1);
    const double v_hat = (1 - b2) * g(0, j) * g(0, j) / (1 - b2);
    const double expect = -lr * m_hat / (std::sqrt(v_hat) + eps);
    CHECK(params[0].value()(0, j) == doctest::Approx(expect).epsilon(1e-10));
  }
}

TEST_CASE("adam: monotone descent on a convex quadratic") {
  // minimize f(p) = (p - 3)^2 from p = 0
  std::vector<Tensor<double>> params{Tensor<double>(Mat<double>::Zero(1, 1), true)};
  Adam<double> opt(0.1);
  double prev = 9.0;
  for (int step = 0; step < 2; ++step) {
    params[0].zero_grad();
    Tensor<double> d = sub(params[0], Tensor<double>::scalar(3.0));
    Tensor<double> loss = mul(d, d);
    backward(loss);
    opt.step(params);
    const double now = std::pow(params[0].value()(0, 0) - 3.0, 2);
    CHECK(now < prev);
    prev = now;
  }
  CHECK(opt.step_count() == 2);
}

TEST_CASE("no-grad mode builds no graph") {
  Tensor<float> x(Mat<float>::Ones(2, 2), true);
  NoGradGuard guard;
  Tensor<float> y = matmul(x, x);
  CHECK_FALSE(y.requires_grad());
  CHECK(y.node()->parents.empty());
}
