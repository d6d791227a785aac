#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sqzt/gradcheck.hpp"
#include "sqzt/kernels.hpp"
#include "sqzt/ops.hpp"
#include "sqzt/tape.hpp"

using namespace sqzt;

namespace {

TensorD rand_t(Rng& rng, std::vector<int64_t> shape, double lo = -1.0, double hi = 1.0) {
  TensorD t(std::move(shape));
  rng.fill_uniform(t, lo, hi);
  return t;
}

TensorD loss_weights(Rng& rng, int64_t n) {
  TensorD w({n});
  rng.fill_uniform(w, -1.0, 1.0);
  return w;
}

}  // namespace

TEST_CASE("quadratic loss: analytic matches finite differences to 1e-9") {
  TensorD x({3}, {1.0, 2.0, 3.0});
  auto fn = [](Tape<double>& t, const std::vector<Var<double>>& v) {
    Var<double> sq = t.mul(v[0], v[0]);
    return t.sum(sq);
  };
  // analytic gradient is (2,4,6)
  {
    Tape<double> t;
    Var<double> xv = t.leaf(&x);
    Var<double> loss = fn(t, {xv});
    t.backward(loss);
    CHECK(t.grad(xv)[0] == doctest::Approx(2.0));
    CHECK(t.grad(xv)[1] == doctest::Approx(4.0));
    CHECK(t.grad(xv)[2] == doctest::Approx(6.0));
  }
  GradCheckResult r = grad_check(fn, {x});
  CHECK(r.ok(1e-9));
}

TEST_CASE("conv2d gradients (input, kernel, bias)") {
  Rng rng(101);
  TensorD x = rand_t(rng, {2, 5, 5});
  TensorD k = rand_t(rng, {3, 2, 3, 3});
  TensorD b = rand_t(rng, {3});
  TensorD lw = loss_weights(rng, 3 * 3 * 3);
  auto fn = [&lw](Tape<double>& t, const std::vector<Var<double>>& v) {
    Var<double> y = t.conv2d(v[0], v[1], v[2], 2, 1);
    return t.weighted_sum(y, lw);
  };
  GradCheckResult r = grad_check(fn, {x, k, b});
  CHECK(r.ok(1e-6));
}

TEST_CASE("tfc2d gradients including channel weights") {
  Rng rng(103);
  TensorD x = rand_t(rng, {3, 4, 4});
  TensorD k = rand_t(rng, {2, 3, 3, 3});
  TensorD w = rand_t(rng, {3}, 0.2, 1.2);
  TensorD lw = loss_weights(rng, 2 * 4 * 4);
  auto fn = [&lw](Tape<double>& t, const std::vector<Var<double>>& v) {
    Var<double> scaled = t.mul(v[0], t.reshape(v[2], {3, 1, 1}));
    Var<double> y = t.conv2d(scaled, v[1], std::nullopt, 1, 1);
    return t.weighted_sum(y, lw);
  };
  GradCheckResult r = grad_check(fn, {x, k, w});
  CHECK(r.ok(1e-6));
}

TEST_CASE("linear gradients") {
  Rng rng(105);
  TensorD x = rand_t(rng, {2, 8});
  TensorD w = rand_t(rng, {5, 8});
  TensorD b = rand_t(rng, {5});
  TensorD lw = loss_weights(rng, 10);
  auto fn = [&lw](Tape<double>& t, const std::vector<Var<double>>& v) {
    return t.weighted_sum(t.linear(v[0], v[1], v[2]), lw);
  };
  CHECK(grad_check(fn, {x, w, b}).ok(1e-6));
}

TEST_CASE("pooling gradients (max ties excluded by construction)") {
  Rng rng(107);
  TensorD x = rand_t(rng, {3, 4, 4});
  TensorD lw = loss_weights(rng, 3);
  auto favg = [&lw](Tape<double>& t, const std::vector<Var<double>>& v) {
    return t.weighted_sum(t.global_pool(v[0], ops::PoolKind::global_avg), lw);
  };
  auto fmax = [&lw](Tape<double>& t, const std::vector<Var<double>>& v) {
    return t.weighted_sum(t.global_pool(v[0], ops::PoolKind::global_max), lw);
  };
  CHECK(grad_check(favg, {x}).ok(1e-6));
  CHECK(grad_check(fmax, {x}).ok(1e-6));

  TensorD y = rand_t(rng, {2, 6, 6});
  auto favg2 = [&](Tape<double>& t, const std::vector<Var<double>>& v) {
    Var<double> p = t.avgpool2x2(t.reshape(v[0], {1, 2, 6, 6}));
    return t.sum(p);
  };
  CHECK(grad_check(favg2, {y}).ok(1e-6));
}

TEST_CASE("relu / sigmoid / broadcast add / broadcast mul gradients") {
  Rng rng(109);
  TensorD x = rand_t(rng, {4, 3, 3});
  nudge_from_zero(x, 0.05);  // keep the finite-difference step away from the kink
  TensorD lw = loss_weights(rng, x.numel());
  auto frelu = [&lw](Tape<double>& t, const std::vector<Var<double>>& v) {
    return t.weighted_sum(t.relu(v[0]), lw);
  };
  CHECK(grad_check(frelu, {x}).ok(1e-6));

  auto fsig = [&lw](Tape<double>& t, const std::vector<Var<double>>& v) {
    return t.weighted_sum(t.sigmoid(v[0]), lw);
  };
  CHECK(grad_check(fsig, {x}).ok(1e-6));

  TensorD pos = rand_t(rng, {4, 1, 1});
  auto fadd = [&lw](Tape<double>& t, const std::vector<Var<double>>& v) {
    return t.weighted_sum(t.add(v[0], v[1]), lw);
  };
  CHECK(grad_check(fadd, {x, pos}).ok(1e-6));

  TensorD gate = rand_t(rng, {4, 1, 1}, 0.1, 0.9);
  auto fmul = [&lw](Tape<double>& t, const std::vector<Var<double>>& v) {
    return t.weighted_sum(t.mul(v[0], v[1]), lw);
  };
  CHECK(grad_check(fmul, {x, gate}).ok(1e-6));
}

TEST_CASE("batchnorm gradients, train and infer") {
  Rng rng(111);
  TensorD x = rand_t(rng, {2, 3, 4, 4});
  TensorD gamma = rand_t(rng, {3}, 0.5, 1.5);
  TensorD beta = rand_t(rng, {3});
  TensorD lw = loss_weights(rng, x.numel());
  auto ftrain = [&lw](Tape<double>& t, const std::vector<Var<double>>& v) {
    TensorD rm({3});
    TensorD rv = TensorD::full({3}, 1.0);
    Var<double> y = t.batchnorm(v[0], v[1], v[2], rm, rv, 1e-5, 0.1, true);
    return t.weighted_sum(y, lw);
  };
  CHECK(grad_check(ftrain, {x, gamma, beta}).ok(1e-6));

  TensorD rm = rand_t(rng, {3});
  TensorD rv = rand_t(rng, {3}, 0.5, 2.0);
  auto finfer = [&](Tape<double>& t, const std::vector<Var<double>>& v) {
    Var<double> y = t.batchnorm(v[0], v[1], v[2], rm, rv, 1e-5, 0.1, false);
    return t.weighted_sum(y, lw);
  };
  CHECK(grad_check(finfer, {x, gamma, beta}).ok(1e-6));
}

TEST_CASE("cross-entropy gradients") {
  Rng rng(113);
  TensorD logits = rand_t(rng, {3, 5});
  auto fn = [](Tape<double>& t, const std::vector<Var<double>>& v) {
    return t.cross_entropy(v[0], {1, 4, 0});
  };
  CHECK(grad_check(fn, {logits}).ok(1e-6));
}

TEST_CASE("composite conv -> relu -> global_avg passes the checker") {
  Rng rng(115);
  TensorD x = rand_t(rng, {2, 6, 6}, 0.1, 1.0);
  TensorD k = rand_t(rng, {3, 2, 3, 3});
  TensorD lw = loss_weights(rng, 3);
  auto fn = [&lw](Tape<double>& t, const std::vector<Var<double>>& v) {
    Var<double> y = t.relu(t.conv2d(v[0], v[1], std::nullopt, 1, 1));
    return t.weighted_sum(t.global_pool(y, ops::PoolKind::global_avg), lw);
  };
  CHECK(grad_check(fn, {x, k}).ok(1e-6));
}

TEST_CASE("mutation test: a corrupted kernel gradient is flagged") {
  Rng rng(117);
  TensorD x = rand_t(rng, {2, 5, 5});
  TensorD k = rand_t(rng, {2, 2, 3, 3});
  TensorD lw = loss_weights(rng, 2 * 5 * 5);
  auto fn = [&lw](Tape<double>& t, const std::vector<Var<double>>& v) {
    Var<double> x_in = v[0], k_in = v[1];
    TensorD fwd = ops::conv2d(t.value(x_in), t.value(k_in), nullptr, 1, 1);
    Var<double> y = t.custom(std::move(fwd), [x_in, k_in](Tape<double>& tt, Var<double> out) {
      const TensorD* g = tt.grad_of(out);
      if (g == nullptr) return;
      TensorD gk_local(tt.value(k_in).shape());
      ops::conv2d_bwd(tt.value(x_in), tt.value(k_in), *g, 1, 1, tt.buf(x_in), &gk_local, nullptr);
      // deliberately wrong: kernel gradient scaled by 1.01
      kern::axpy(1.01, gk_local.data(), tt.buf(k_in)->data(),
                 static_cast<size_t>(gk_local.numel()));
    });
    return t.weighted_sum(y, lw);
  };
  GradCheckResult r = grad_check(fn, {x, k});
  CHECK(r.max_rel_err > 1e-3);
}

TEST_CASE("non-finite evaluation is reported with the failing coordinate") {
  TensorD x({2}, {1.0, 2.0});
  auto fn = [](Tape<double>& t, const std::vector<Var<double>>& v) {
    TensorD bad = t.value(v[0]);
    bad[0] = std::log(bad[0] - 1.0);  // -inf at x0 <= 1
    return t.custom(TensorD::scalar(bad[0] + bad[1]),
                    [](Tape<double>&, Var<double>) {});
  };
  GradCheckResult r = grad_check(fn, {x});
  CHECK(r.nonfinite);
  CHECK(!r.message.empty());
}

TEST_CASE("every leaf touched in forward receives a gradient (possibly zero)") {
  Rng rng(119);
  TensorD a = rand_t(rng, {3});
  TensorD unused = rand_t(rng, {4});
  Tape<double> t;
  Var<double> av = t.leaf(&a);
  Var<double> uv = t.leaf(&unused);
  Var<double> loss = t.sum(t.mul(av, av));
  t.backward(loss);
  CHECK(t.grad(av).numel() == 3);
  const TensorD& gu = t.grad(uv);  // never touched: must read back as zeros
  REQUIRE(gu.numel() == 4);
  for (int64_t i = 0; i < 4; ++i) CHECK(gu[i] == 0.0);
}
