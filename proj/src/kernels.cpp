#include "quake/kernels.hpp"

#include <cstdlib>

namespace quake::kern {

namespace scalar {

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(double s, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += s * x[i];
}

double sum_sq(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * x[i];
  return s;
}

}  // namespace scalar

bool cpu_has_avx2() {
#if defined(QUAKE_HAVE_AVX2_BUILD)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

namespace {

struct OpTable {
  double (*dot)(const double*, const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  double (*sum_sq)(const double*, std::size_t);
  Isa isa;
};

constexpr OpTable kScalarOps{scalar::dot, scalar::axpy, scalar::sum_sq,
                             Isa::scalar};

#if defined(QUAKE_HAVE_AVX2_BUILD)
constexpr OpTable kAvx2Ops{avx2::dot, avx2::axpy, avx2::sum_sq, Isa::avx2};
#endif

OpTable resolve(Isa isa) {
#if defined(QUAKE_HAVE_AVX2_BUILD)
  if (isa == Isa::avx2) return kAvx2Ops;
#endif
  (void)isa;
  return kScalarOps;
}

OpTable initial_table() {
  Isa isa = cpu_has_avx2() ? Isa::avx2 : Isa::scalar;
  if (const char* env = std::getenv("QUAKE_ISA")) {
    std::string_view v(env);
    if (v == "scalar") isa = Isa::scalar;
    if (v == "avx2" && cpu_has_avx2()) isa = Isa::avx2;
  }
  return resolve(isa);
}

OpTable g_ops = initial_table();

}  // namespace

Isa active() { return g_ops.isa; }

std::string_view isa_name(Isa isa) {
  return isa == Isa::avx2 ? "avx2" : "scalar";
}

bool set_isa(std::string_view name) {
  if (name == "auto") {
    g_ops = resolve(cpu_has_avx2() ? Isa::avx2 : Isa::scalar);
    return true;
  }
  if (name == "scalar") {
    g_ops = kScalarOps;
    return true;
  }
  if (name == "avx2") {
    if (!cpu_has_avx2()) return false;
    g_ops = resolve(Isa::avx2);
    return true;
  }
  return false;
}

double dot(const double* a, const double* b, std::size_t n) {
  return g_ops.dot(a, b, n);
}

void axpy(double s, const double* x, double* y, std::size_t n) {
  g_ops.axpy(s, x, y, n);
}

double sum_sq(const double* x, std::size_t n) { return g_ops.sum_sq(x, n); }

void matvec(const double* w, std::size_t rows, std::size_t cols,
            const double* x, double* y) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = g_ops.dot(w + r * cols, x, cols);
}

void matvec_acc(const double* w, std::size_t rows, std::size_t cols,
                const double* x, double* y) {
  for (std::size_t r = 0; r < rows; ++r)
    y[r] += g_ops.dot(w + r * cols, x, cols);
}

void matvec_t_acc(const double* w, std::size_t rows, std::size_t cols,
                  const double* d, double* dx) {
  for (std::size_t r = 0; r < rows; ++r)
    g_ops.axpy(d[r], w + r * cols, dx, cols);
}

}  // namespace quake::kern
