#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "sqzt/kernels.hpp"
#include "sqzt/tensor.hpp"

using namespace sqzt;

namespace {

template <typename T>
std::vector<T> random_vec(Rng& rng, size_t n, double lo = -1.0, double hi = 1.0) {
  std::vector<T> v(n);
  for (auto& x : v) x = static_cast<T>(rng.uniform(lo, hi));
  return v;
}

template <typename T>
double max_abs_diff(const std::vector<T>& a, const std::vector<T>& b) {
  double m = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::fabs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  }
  return m;
}

// Lengths around the vector width boundaries plus the sizes the conv loops hit.
const std::vector<size_t> kLens = {0, 1, 3, 7, 8, 9, 15, 16, 17, 31, 64, 100, 1023};

}  // namespace

TEST_CASE("isa selection") {
  CHECK(std::string(kern::isa_name(kern::Isa::scalar)) == "scalar");
  CHECK(std::string(kern::isa_name(kern::Isa::avx2)) == "avx2");
  const kern::Isa before = kern::active_isa();
  kern::set_isa(kern::Isa::scalar);
  CHECK(kern::active_isa() == kern::Isa::scalar);
  kern::set_isa(before);
}

template <typename T>
static void equivalence_suite(double tol_elementwise, double tol_reduce) {
  if (!kern::cpu_has_avx2()) return;  // nothing to compare against
  Rng rng(20240601);
  for (size_t n : kLens) {
    auto a = random_vec<T>(rng, n);
    auto b = random_vec<T>(rng, n);
    std::vector<T> r1(n), r2(n);

    kern::ref::add(a.data(), b.data(), r1.data(), n);
    kern::avx2::add(a.data(), b.data(), r2.data(), n);
    CHECK(max_abs_diff(r1, r2) == 0.0);

    kern::ref::mul(a.data(), b.data(), r1.data(), n);
    kern::avx2::mul(a.data(), b.data(), r2.data(), n);
    CHECK(max_abs_diff(r1, r2) == 0.0);

    kern::ref::scale(a.data(), T(1.7), r1.data(), n);
    kern::avx2::scale(a.data(), T(1.7), r2.data(), n);
    CHECK(max_abs_diff(r1, r2) == 0.0);

    kern::ref::scale_shift(a.data(), T(0.3), T(-2), r1.data(), n);
    kern::avx2::scale_shift(a.data(), T(0.3), T(-2), r2.data(), n);
    CHECK(max_abs_diff(r1, r2) <= tol_elementwise);  // FMA rounding

    kern::ref::norm_affine(a.data(), T(0.1), T(1.3), T(-0.4), r1.data(), n);
    kern::avx2::norm_affine(a.data(), T(0.1), T(1.3), T(-0.4), r2.data(), n);
    CHECK(max_abs_diff(r1, r2) <= tol_elementwise);

    kern::ref::relu(a.data(), r1.data(), n);
    kern::avx2::relu(a.data(), r2.data(), n);
    CHECK(max_abs_diff(r1, r2) == 0.0);

    std::vector<T> y1 = b, y2 = b;
    kern::ref::axpy(T(0.77), a.data(), y1.data(), n);
    kern::avx2::axpy(T(0.77), a.data(), y2.data(), n);
    CHECK(max_abs_diff(y1, y2) <= tol_elementwise);

    std::vector<T> m1 = b, m2 = b;
    kern::ref::mul_acc(a.data(), b.data(), m1.data(), n);
    kern::avx2::mul_acc(a.data(), b.data(), m2.data(), n);
    CHECK(max_abs_diff(m1, m2) <= tol_elementwise);

    std::vector<T> g1(n, T(0)), g2(n, T(0));
    kern::ref::relu_bwd(a.data(), b.data(), g1.data(), n);
    kern::avx2::relu_bwd(a.data(), b.data(), g2.data(), n);
    CHECK(max_abs_diff(g1, g2) == 0.0);

    const double d1 = kern::ref::dot(a.data(), b.data(), n);
    const double d2 = kern::avx2::dot(a.data(), b.data(), n);
    CHECK(std::fabs(d1 - d2) <= tol_reduce * std::max(1.0, std::fabs(d1)));

    const double s1 = kern::ref::sum(a.data(), n);
    const double s2 = kern::avx2::sum(a.data(), n);
    CHECK(std::fabs(s1 - s2) <= tol_reduce * std::max(1.0, std::fabs(s1)));

    const double q1 = kern::ref::sqdiff_sum(a.data(), T(0.25), n);
    const double q2 = kern::avx2::sqdiff_sum(a.data(), T(0.25), n);
    CHECK(std::fabs(q1 - q2) <= tol_reduce * std::max(1.0, std::fabs(q1)));
  }
}

TEST_CASE("scalar and avx2 variants are equivalent (f32)") {
  equivalence_suite<float>(1e-6, 1e-5);
}

TEST_CASE("scalar and avx2 variants are equivalent (f64)") {
  equivalence_suite<double>(1e-14, 1e-13);
}

TEST_CASE("strided variants match dense on stride 1 and agree with loops") {
  Rng rng(7);
  auto a = random_vec<float>(rng, 64);
  auto b = random_vec<float>(rng, 64);

  // stride-1 fast path
  CHECK(kern::dot_s(a.data(), 1, b.data(), 1, 64) == kern::dot(a.data(), b.data(), 64));

  // stride-2 gather against a plain loop
  float want = 0;
  for (size_t i = 0; i < 16; ++i) want += a[2 * i] * b[3 * i];
  CHECK(kern::dot_s(a.data(), 2, b.data(), 3, 16) == doctest::Approx(want).epsilon(1e-6));

  std::vector<float> y = b;
  kern::axpy_s(0.5f, a.data(), 2, y.data(), 3, 16);
  for (size_t i = 0; i < 16; ++i) {
    CHECK(y[3 * i] == doctest::Approx(b[3 * i] + 0.5f * a[2 * i]));
  }
}

TEST_CASE("dispatched entry points honor the forced isa") {
  Rng rng(11);
  auto a = random_vec<float>(rng, 37);
  auto b = random_vec<float>(rng, 37);
  const kern::Isa before = kern::active_isa();

  kern::set_isa(kern::Isa::scalar);
  const float ds = kern::dot(a.data(), b.data(), 37);
  CHECK(ds == kern::ref::dot(a.data(), b.data(), 37));

  if (kern::cpu_has_avx2()) {
    kern::set_isa(kern::Isa::avx2);
    const float dv = kern::dot(a.data(), b.data(), 37);
    CHECK(dv == kern::avx2::dot(a.data(), b.data(), 37));
    CHECK(std::fabs(ds - dv) <= 1e-5f);
  }
  kern::set_isa(before);
}
