#pragma once

#include <cstddef>
#include <string>

// Data-parallel inner loops behind all tensor operators. Every kernel has a
// scalar reference implementation and, for the contiguous entry points, an
// AVX2+FMA variant selected at runtime. The two variants are equivalence-tested
// against each other; reductions use a fixed lane order so results are
// deterministic within a given ISA mode.
namespace sqzt::kern {

enum class Isa { scalar, avx2 };

bool cpu_has_avx2();
/// Force a mode (Isa::avx2 throws if the CPU lacks it). Also settable through
/// the SQZT_KERNELS environment variable: "scalar", "avx2" or "auto".
void set_isa(Isa isa);
Isa active_isa();
const char* isa_name(Isa isa);

// Contiguous elementwise / reduction kernels, dispatched.
void add(const float* a, const float* b, float* out, size_t n);
void add(const double* a, const double* b, double* out, size_t n);
void mul(const float* a, const float* b, float* out, size_t n);
void mul(const double* a, const double* b, double* out, size_t n);
void scale(const float* a, float s, float* out, size_t n);
void scale(const double* a, double s, double* out, size_t n);
void scale_shift(const float* x, float a, float b, float* out, size_t n);  // out = a*x + b
void scale_shift(const double* x, double a, double b, double* out, size_t n);
void axpy(float a, const float* x, float* y, size_t n);  // y += a*x
void axpy(double a, const double* x, double* y, size_t n);
float dot(const float* a, const float* b, size_t n);
double dot(const double* a, const double* b, size_t n);
float sum(const float* a, size_t n);
double sum(const double* a, size_t n);
float sqdiff_sum(const float* a, float mean, size_t n);  // sum((a-mean)^2)
double sqdiff_sum(const double* a, double mean, size_t n);
void relu(const float* x, float* out, size_t n);
void relu(const double* x, double* out, size_t n);
void relu_bwd(const float* y, const float* g, float* gx, size_t n);  // gx += g * (y > 0)
void relu_bwd(const double* y, const double* g, double* gx, size_t n);
void mul_acc(const float* a, const float* b, float* out, size_t n);  // out += a*b
void mul_acc(const double* a, const double* b, double* out, size_t n);
void norm_affine(const float* x, float m, float a, float b, float* out, size_t n);  // (x-m)*a+b
void norm_affine(const double* x, double m, double a, double b, double* out, size_t n);

// Strided variants used by stride>1 convolutions; scalar on every ISA.
void axpy_s(float a, const float* x, ptrdiff_t incx, float* y, ptrdiff_t incy, size_t n);
void axpy_s(double a, const double* x, ptrdiff_t incx, double* y, ptrdiff_t incy, size_t n);
float dot_s(const float* a, ptrdiff_t inca, const float* b, ptrdiff_t incb, size_t n);
double dot_s(const double* a, ptrdiff_t inca, const double* b, ptrdiff_t incb, size_t n);

// Scalar reference implementations, exposed for equivalence tests.
namespace ref {
void add(const float* a, const float* b, float* out, size_t n);
void add(const double* a, const double* b, double* out, size_t n);
void mul(const float* a, const float* b, float* out, size_t n);
void mul(const double* a, const double* b, double* out, size_t n);
void scale(const float* a, float s, float* out, size_t n);
void scale(const double* a, double s, double* out, size_t n);
void scale_shift(const float* x, float a, float b, float* out, size_t n);
void scale_shift(const double* x, double a, double b, double* out, size_t n);
void axpy(float a, const float* x, float* y, size_t n);
void axpy(double a, const double* x, double* y, size_t n);
float dot(const float* a, const float* b, size_t n);
double dot(const double* a, const double* b, size_t n);
float sum(const float* a, size_t n);
double sum(const double* a, size_t n);
float sqdiff_sum(const float* a, float mean, size_t n);
double sqdiff_sum(const double* a, double mean, size_t n);
void relu(const float* x, float* out, size_t n);
void relu(const double* x, double* out, size_t n);
void relu_bwd(const float* y, const float* g, float* gx, size_t n);
void relu_bwd(const double* y, const double* g, double* gx, size_t n);
void mul_acc(const float* a, const float* b, float* out, size_t n);
void mul_acc(const double* a, const double* b, double* out, size_t n);
void norm_affine(const float* x, float m, float a, float b, float* out, size_t n);
void norm_affine(const double* x, double m, double a, double b, double* out, size_t n);
}  // namespace ref

// AVX2+FMA implementations (defined only on x86-64 builds; callable only when
// cpu_has_avx2() reports support).
namespace avx2 {
void add(const float* a, const float* b, float* out, size_t n);
void add(const double* a, const double* b, double* out, size_t n);
void mul(const float* a, const float* b, float* out, size_t n);
void mul(const double* a, const double* b, double* out, size_t n);
void scale(const float* a, float s, float* out, size_t n);
void scale(const double* a, double s, double* out, size_t n);
void scale_shift(const float* x, float a, float b, float* out, size_t n);
void scale_shift(const double* x, double a, double b, double* out, size_t n);
void axpy(float a, const float* x, float* y, size_t n);
void axpy(double a, const double* x, double* y, size_t n);
float dot(const float* a, const float* b, size_t n);
double dot(const double* a, const double* b, size_t n);
float sum(const float* a, size_t n);
double sum(const double* a, size_t n);
float sqdiff_sum(const float* a, float mean, size_t n);
double sqdiff_sum(const double* a, double mean, size_t n);
void relu(const float* x, float* out, size_t n);
void relu(const double* x, double* out, size_t n);
void relu_bwd(const float* y, const float* g, float* gx, size_t n);
void relu_bwd(const double* y, const double* g, double* gx, size_t n);
void mul_acc(const float* a, const float* b, float* out, size_t n);
void mul_acc(const double* a, const double* b, double* out, size_t n);
void norm_affine(const float* x, float m, float a, float b, float* out, size_t n);
void norm_affine(const double* x, double m, double a, double b, double* out, size_t n);
}  // namespace avx2

}  // namespace sqzt::kern
