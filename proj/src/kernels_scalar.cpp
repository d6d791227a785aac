#include "sqzt/kernels.hpp"

namespace sqzt::kern::ref {

namespace {

template <typename T>
void add_impl(const T* a, const T* b, T* out, size_t n) {
  for (size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

template <typename T>
void mul_impl(const T* a, const T* b, T* out, size_t n) {
  for (size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

template <typename T>
void scale_impl(const T* a, T s, T* out, size_t n) {
  for (size_t i = 0; i < n; ++i) out[i] = a[i] * s;
}

template <typename T>
void scale_shift_impl(const T* x, T a, T b, T* out, size_t n) {
  for (size_t i = 0; i < n; ++i) out[i] = a * x[i] + b;
}

template <typename T>
void axpy_impl(T a, const T* x, T* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

template <typename T>
T dot_impl(const T* a, const T* b, size_t n) {
  T acc = 0;
  for (size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

template <typename T>
T sum_impl(const T* a, size_t n) {
  T acc = 0;
  for (size_t i = 0; i < n; ++i) acc += a[i];
  return acc;
}

template <typename T>
T sqdiff_sum_impl(const T* a, T mean, size_t n) {
  T acc = 0;
  for (size_t i = 0; i < n; ++i) {
    const T d = a[i] - mean;
    acc += d * d;
  }
  return acc;
}

template <typename T>
void relu_impl(const T* x, T* out, size_t n) {
  for (size_t i = 0; i < n; ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
}

template <typename T>
void mul_acc_impl(const T* a, const T* b, T* out, size_t n) {
  for (size_t i = 0; i < n; ++i) out[i] += a[i] * b[i];
}

template <typename T>
void norm_affine_impl(const T* x, T m, T a, T b, T* out, size_t n) {
  for (size_t i = 0; i < n; ++i) out[i] = (x[i] - m) * a + b;
}

template <typename T>
void relu_bwd_impl(const T* y, const T* g, T* gx, size_t n) {
  for (size_t i = 0; i < n; ++i) {
    if (y[i] > T(0)) gx[i] += g[i];
  }
}

}  // namespace

void add(const float* a, const float* b, float* out, size_t n) { add_impl(a, b, out, n); }
void add(const double* a, const double* b, double* out, size_t n) { add_impl(a, b, out, n); }
void mul(const float* a, const float* b, float* out, size_t n) { mul_impl(a, b, out, n); }
void mul(const double* a, const double* b, double* out, size_t n) { mul_impl(a, b, out, n); }
void scale(const float* a, float s, float* out, size_t n) { scale_impl(a, s, out, n); }
void scale(const double* a, double s, double* out, size_t n) { scale_impl(a, s, out, n); }
void scale_shift(const float* x, float a, float b, float* out, size_t n) {
  scale_shift_impl(x, a, b, out, n);
}
void scale_shift(const double* x, double a, double b, double* out, size_t n) {
  scale_shift_impl(x, a, b, out, n);
}
void axpy(float a, const float* x, float* y, size_t n) { axpy_impl(a, x, y, n); }
void axpy(double a, const double* x, double* y, size_t n) { axpy_impl(a, x, y, n); }
float dot(const float* a, const float* b, size_t n) { return dot_impl(a, b, n); }
double dot(const double* a, const double* b, size_t n) { return dot_impl(a, b, n); }
float sum(const float* a, size_t n) { return sum_impl(a, n); }
double sum(const double* a, size_t n) { return sum_impl(a, n); }
float sqdiff_sum(const float* a, float mean, size_t n) { return sqdiff_sum_impl(a, mean, n); }
double sqdiff_sum(const double* a, double mean, size_t n) { return sqdiff_sum_impl(a, mean, n); }
void relu(const float* x, float* out, size_t n) { relu_impl(x, out, n); }
void relu(const double* x, double* out, size_t n) { relu_impl(x, out, n); }
void relu_bwd(const float* y, const float* g, float* gx, size_t n) { relu_bwd_impl(y, g, gx, n); }
void relu_bwd(const double* y, const double* g, double* gx, size_t n) { relu_bwd_impl(y, g, gx, n); }
void mul_acc(const float* a, const float* b, float* out, size_t n) { mul_acc_impl(a, b, out, n); }
void mul_acc(const double* a, const double* b, double* out, size_t n) { mul_acc_impl(a, b, out, n); }
void norm_affine(const float* x, float m, float a, float b, float* out, size_t n) {
  norm_affine_impl(x, m, a, b, out, n);
}
void norm_affine(const double* x, double m, double a, double b, double* out, size_t n) {
  norm_affine_impl(x, m, a, b, out, n);
}

}  // namespace sqzt::kern::ref
