#include "sqzt/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <stdexcept>

namespace sqzt::kern {

#if defined(__x86_64__) || defined(_M_X64)
#define SQZT_X86 1
#else
#define SQZT_X86 0
#endif

bool cpu_has_avx2() {
#if SQZT_X86
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

namespace {

Isa resolve_initial() {
  const char* env = std::getenv("SQZT_KERNELS");
  if (env != nullptr) {
    if (std::strcmp(env, "scalar") == 0) return Isa::scalar;
    if (std::strcmp(env, "avx2") == 0) {
      if (!cpu_has_avx2()) throw std::runtime_error("SQZT_KERNELS=avx2 but CPU lacks AVX2/FMA");
      return Isa::avx2;
    }
    // anything else (incl. "auto") falls through to detection
  }
  return cpu_has_avx2() ? Isa::avx2 : Isa::scalar;
}

std::atomic<Isa>& isa_state() {
  static std::atomic<Isa> state{resolve_initial()};
  return state;
}

}  // namespace

void set_isa(Isa isa) {
  if (isa == Isa::avx2 && !cpu_has_avx2()) {
    throw std::runtime_error("kern: AVX2/FMA not supported on this CPU");
  }
  isa_state().store(isa, std::memory_order_relaxed);
}

Isa active_isa() { return isa_state().load(std::memory_order_relaxed); }

const char* isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

#if SQZT_X86
#define SQZT_DISPATCH(fn, ...)                                        \
  do {                                                                \
    if (active_isa() == Isa::avx2) return avx2::fn(__VA_ARGS__);      \
    return ref::fn(__VA_ARGS__);                                      \
  } while (0)
#else
#define SQZT_DISPATCH(fn, ...) return ref::fn(__VA_ARGS__)
#endif

void add(const float* a, const float* b, float* out, size_t n) { SQZT_DISPATCH(add, a, b, out, n); }
void add(const double* a, const double* b, double* out, size_t n) {
  SQZT_DISPATCH(add, a, b, out, n);
}
void mul(const float* a, const float* b, float* out, size_t n) { SQZT_DISPATCH(mul, a, b, out, n); }
void mul(const double* a, const double* b, double* out, size_t n) {
  SQZT_DISPATCH(mul, a, b, out, n);
}
void scale(const float* a, float s, float* out, size_t n) { SQZT_DISPATCH(scale, a, s, out, n); }
void scale(const double* a, double s, double* out, size_t n) { SQZT_DISPATCH(scale, a, s, out, n); }
void scale_shift(const float* x, float a, float b, float* out, size_t n) {
  SQZT_DISPATCH(scale_shift, x, a, b, out, n);
}
void scale_shift(const double* x, double a, double b, double* out, size_t n) {
  SQZT_DISPATCH(scale_shift, x, a, b, out, n);
}
void axpy(float a, const float* x, float* y, size_t n) { SQZT_DISPATCH(axpy, a, x, y, n); }
void axpy(double a, const double* x, double* y, size_t n) { SQZT_DISPATCH(axpy, a, x, y, n); }
float dot(const float* a, const float* b, size_t n) { SQZT_DISPATCH(dot, a, b, n); }
double dot(const double* a, const double* b, size_t n) { SQZT_DISPATCH(dot, a, b, n); }
float sum(const float* a, size_t n) { SQZT_DISPATCH(sum, a, n); }
double sum(const double* a, size_t n) { SQZT_DISPATCH(sum, a, n); }
float sqdiff_sum(const float* a, float mean, size_t n) { SQZT_DISPATCH(sqdiff_sum, a, mean, n); }
double sqdiff_sum(const double* a, double mean, size_t n) { SQZT_DISPATCH(sqdiff_sum, a, mean, n); }
void relu(const float* x, float* out, size_t n) { SQZT_DISPATCH(relu, x, out, n); }
void relu(const double* x, double* out, size_t n) { SQZT_DISPATCH(relu, x, out, n); }
void relu_bwd(const float* y, const float* g, float* gx, size_t n) {
  SQZT_DISPATCH(relu_bwd, y, g, gx, n);
}
void relu_bwd(const double* y, const double* g, double* gx, size_t n) {
  SQZT_DISPATCH(relu_bwd, y, g, gx, n);
}
void mul_acc(const float* a, const float* b, float* out, size_t n) {
  SQZT_DISPATCH(mul_acc, a, b, out, n);
}
void mul_acc(const double* a, const double* b, double* out, size_t n) {
  SQZT_DISPATCH(mul_acc, a, b, out, n);
}
void norm_affine(const float* x, float m, float a, float b, float* out, size_t n) {
  SQZT_DISPATCH(norm_affine, x, m, a, b, out, n);
}
void norm_affine(const double* x, double m, double a, double b, double* out, size_t n) {
  SQZT_DISPATCH(norm_affine, x, m, a, b, out, n);
}

#undef SQZT_DISPATCH

namespace {

template <typename T>
void axpy_s_impl(T a, const T* x, ptrdiff_t incx, T* y, ptrdiff_t incy, size_t n) {
  if (incx == 1 && incy == 1) {
    axpy(a, x, y, n);
    return;
  }
  for (size_t i = 0; i < n; ++i) y[static_cast<ptrdiff_t>(i) * incy] += a * x[static_cast<ptrdiff_t>(i) * incx];
}

template <typename T>
T dot_s_impl(const T* a, ptrdiff_t inca, const T* b, ptrdiff_t incb, size_t n) {
  if (inca == 1 && incb == 1) return dot(a, b, n);
  T acc = 0;
  for (size_t i = 0; i < n; ++i) {
    acc += a[static_cast<ptrdiff_t>(i) * inca] * b[static_cast<ptrdiff_t>(i) * incb];
  }
  return acc;
}

}  // namespace

void axpy_s(float a, const float* x, ptrdiff_t incx, float* y, ptrdiff_t incy, size_t n) {
  axpy_s_impl(a, x, incx, y, incy, n);
}
void axpy_s(double a, const double* x, ptrdiff_t incx, double* y, ptrdiff_t incy, size_t n) {
  axpy_s_impl(a, x, incx, y, incy, n);
}
float dot_s(const float* a, ptrdiff_t inca, const float* b, ptrdiff_t incb, size_t n) {
  return dot_s_impl(a, inca, b, incb, n);
}
double dot_s(const double* a, ptrdiff_t inca, const double* b, ptrdiff_t incb, size_t n) {
  return dot_s_impl(a, inca, b, incb, n);
}

}  // namespace sqzt::kern
