#include "doctest.h"

#include <cmath>

#include "fd_check.hpp"
#include "lee/tensor/ops.hpp"
#include "lee/tensor/optim.hpp"

using namespace lee;
using namespace lee::tensor;
using lee::testing::grad_check;
using lee::testing::random_matrix;

namespace {
Tensor param(Rng& rng, Index r, Index c, double s = 1.0) { return Tensor::parameter(random_matrix(rng, r, c, s)); }
}  // namespace

TEST_CASE("forward basics") {
  Rng rng(1);
  const Matrix a = random_matrix(rng, 5, 4);
  CHECK(matmul(Tensor::constant(a), Tensor::constant(Matrix::Identity(4, 4))).value() == a);
  const Matrix sm = softmax_rows(Tensor::constant(a)).value();
  for (Index i = 0; i < 5; ++i) CHECK(std::fabs(sm.row(i).sum() - 1.0) < 1e-6);
  std::vector<char> one_row = {0, 0, 1, 0, 0};
  const Matrix pooled = segment_mean(Tensor::constant(a), {0, 5}, one_row).value();
  CHECK(pooled == a.row(2));
}

TEST_CASE("shape errors name both shapes") {
  Rng rng(2);
  auto a = Tensor::constant(random_matrix(rng, 2, 3));
  auto b = Tensor::constant(random_matrix(rng, 4, 5));
  try {
    matmul(a, b);
    FAIL("expected throw");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2 x 3]") != std::string::npos);
    CHECK(msg.find("[4 x 5]") != std::string::npos);
  }
  CHECK_THROWS_AS(add(a, b), std::invalid_argument);
}

TEST_CASE("backward contracts") {
  auto x = Tensor::parameter(Matrix::Constant(1, 1, 3.0));
  backward(square(x));
  CHECK(x.grad()(0, 0) == 6.0);
  x.zero_grad();
  auto c = Tensor::constant(Matrix::Constant(1, 1, 2.0));
  backward(add(mul(c, c), mul(x, Tensor::scalar(0.0))));
  CHECK(x.grad()(0, 0) == 0.0);
  CHECK_THROWS_AS(backward(Tensor::constant(Matrix::Ones(2, 2))), std::invalid_argument);
  CHECK_THROWS_AS(backward(square(c)), std::invalid_argument);
}

TEST_CASE("frozen parameters receive nothing while variables still do") {
  Rng rng(3);
  auto w = param(rng, 3, 3);
  auto z = Tensor::variable(random_matrix(rng, 1, 3));
  {
    FreezeParamsGuard freeze;
    backward(sum(square(matmul(z, w))));
  }
  CHECK_FALSE(w.has_grad());
  CHECK(z.has_grad());
  {
    NoGradGuard ng;
    auto y = matmul(z, w);
    CHECK_FALSE(y.requires_grad());
  }
}

TEST_CASE("primitive gradients match finite differences") {
  Rng rng(4);
  auto a = param(rng, 4, 3), b = param(rng, 3, 5), row = param(rng, 1, 5), s = param(rng, 1, 1);
  auto check = [&](std::vector<Tensor> leaves, auto fn) { CHECK(grad_check(leaves, fn).max_rel < 1e-4); };
  check({a, b}, [](const std::vector<Tensor>& l) { return sum(square(matmul(l[0], l[1]))); });
  check({a, b, row}, [](const std::vector<Tensor>& l) { return sum(silu(linear(l[0], l[1], l[2]))); });
  check({b, row}, [](const std::vector<Tensor>& l) { return sum(tanh(mul(l[0], l[1]))); });
  check({b, s}, [](const std::vector<Tensor>& l) { return mean(exp(sub(l[0], l[1]))); });
  check({b}, [](const std::vector<Tensor>& l) { return sum(signed_log1p(scale(l[0], 3.0))); });
  check({b}, [](const std::vector<Tensor>& l) { return sum(signed_expm1(l[0])); });
  check({b}, [](const std::vector<Tensor>& l) { return sum(mul(softmax_rows(l[0]), l[0])); });
  check({b}, [](const std::vector<Tensor>& l) { return sum(square(reshape(slice_cols(l[0], 1, 4), 4, 3))); });
  check({a, b}, [](const std::vector<Tensor>& l) {
    return sum(square(concat_cols({slice_rows(concat_rows({l[0], l[0]}), 2, 3), l[1]})));
  });
  check({b}, [](const std::vector<Tensor>& l) { return sum(square(gather_rows(l[0], {2, 0, 2}))); });
  check({b}, [](const std::vector<Tensor>& l) { return sum(square(segment_mean(l[0], {0, 1, 3}, {1, 1, 0}))); });
  check({b}, [](const std::vector<Tensor>& l) { return sum(square(row_sum(l[0]))); });
  auto g = param(rng, 1, 5), be = param(rng, 1, 5);
  check({b, g, be}, [](const std::vector<Tensor>& l) { return sum(mul(layer_norm(l[0], l[1], l[2]), l[0])); });
  check({b}, [](const std::vector<Tensor>& l) {
    return cross_entropy(l[0], {1, 4, 0}, {1, 0, 1});
  });
}

TEST_CASE("cross entropy values") {
  Matrix uniform = Matrix::Zero(3, 40);
  CHECK(std::fabs(cross_entropy(Tensor::constant(uniform), {0, 5, 39}, {1, 1, 1}).item() - std::log(40.0)) < 1e-12);
  Matrix sharp = Matrix::Constant(2, 4, -1000.0);
  sharp(0, 1) = 1000.0;
  sharp(1, 3) = 1000.0;
  CHECK(cross_entropy(Tensor::constant(sharp), {1, 3}, {1, 1}).item() == 0.0);
  CHECK_THROWS_AS(cross_entropy(Tensor::constant(sharp), {1, 3}, {0, 0}), std::invalid_argument);
}

TEST_CASE("attention matches the scalar reference and finite differences") {
  Rng rng(5);
  kernels::AttentionLayout layout;
  layout.q_offsets = {0, 3, 7};
  layout.k_offsets = {0, 4, 9};
  layout.key_valid = {1, 0, 1, 1, 1, 1, 0, 1, 1};
  for (bool causal : {false, true}) {
    layout.causal = causal;
    auto q = param(rng, 7, 8), k = param(rng, 9, 8), v = param(rng, 9, 8);
    Matrix ref;
    kernels::attention_forward_serial(q.value(), k.value(), v.value(), 2, layout, ref);
    const Matrix got = attention(q, k, v, 2, layout).value();
    CHECK((got - ref).cwiseAbs().maxCoeff() < 1e-12);
    auto r = grad_check({q, k, v}, [&](const std::vector<Tensor>& l) {
      return sum(square(attention(l[0], l[1], l[2], 2, layout)));
    });
    CHECK(r.max_rel < 1e-4);
  }
}

TEST_CASE("random MLP gradient check") {
  for (int seed = 0; seed < 5; ++seed) {
    Rng rng(100 + seed);
    auto x = Tensor::constant(random_matrix(rng, 6, 5));
    std::vector<Tensor> leaves = {param(rng, 5, 8, 0.5), param(rng, 1, 8), param(rng, 8, 8, 0.5), param(rng, 1, 8),
                                  param(rng, 8, 1, 0.5), param(rng, 1, 1)};
    auto r = grad_check(leaves, [&](const std::vector<Tensor>& l) {
      auto h = silu(linear(x, l[0], l[1]));
      h = silu(linear(h, l[2], l[3]));
      return mean(square(linear(h, l[4], l[5])));
    });
    CHECK(r.max_rel < 1e-4);
  }
}

TEST_CASE("gemm kernels agree") {
  Rng rng(6);
  for (Index m : {1, 63, 64, 130}) {
    const Matrix a = random_matrix(rng, m, 37), b = random_matrix(rng, 37, 21);
    Matrix c1, c2, c3, c4;
    kernels::gemm_serial(a, b, c1);
    kernels::gemm(a, b, c2);
    CHECK((c1 - c2).cwiseAbs().maxCoeff() < 1e-10);
    const Matrix at = a.transpose();
    kernels::gemm_tn(at, b, c3);
    CHECK((c1 - c3).cwiseAbs().maxCoeff() < 1e-10);
    const Matrix bt = b.transpose();
    kernels::gemm_nt(a, bt, c4);
    CHECK((c1 - c4).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("AdamW") {
  SUBCASE("zero gradient and zero decay leave parameters unchanged") {
    auto p = Tensor::parameter(Matrix::Constant(2, 2, 1.5));
    AdamW opt({p});
    p.mutable_value();
    backward(sum(mul(p, Tensor::scalar(0.0))));
    opt.step(1e-2);
    CHECK(p.value() == Matrix::Constant(2, 2, 1.5));
  }
  SUBCASE("quadratic bowl") {
    Rng rng(7);
    auto p = Tensor::parameter(random_matrix(rng, 1, 10));
    AdamW opt({p});
    int steps = 0;
    for (; steps < 2000; ++steps) {
      opt.zero_grad();
      auto loss = sum(square(p));
      if (loss.item() < 1e-6) break;
      backward(loss);
      opt.step(cosine_lr(steps, 2000, 0.1, 1e-4));
    }
    CHECK(sum(square(p)).item() < 1e-6);
  }
  SUBCASE("non-finite gradient is skipped and counted") {
    auto p = Tensor::parameter(Matrix::Constant(1, 1, 1.0));
    AdamW opt({p});
    backward(mul(p, Tensor::scalar(std::nan(""))));
    opt.step(0.1);
    CHECK(opt.skipped() == 1);
    CHECK(p.value()(0, 0) == 1.0);
  }
  CHECK(cosine_lr(0, 1000) == 3e-4);
  CHECK(std::fabs(cosine_lr(999, 1000) - 1e-5) < 1e-18);
}
