#pragma once

#include <cstddef>
#include <string_view>

// Arithmetic inner loops used throughout the toolkit (dense/conv/LSTM layers,
// filterbank and DCT products, FIR resampling). A scalar reference path is
// always available; an AVX2+FMA path is selected at runtime when the CPU
// supports it. Both paths are equivalence-tested against each other.
//
// Pick the path once at startup (or via QUAKE_ISA=scalar|avx2|auto); the
// active path is stable for the life of the process, so results are
// reproducible run to run on the same machine.

namespace quake::kern {

enum class Isa { scalar, avx2 };

Isa active();
std::string_view isa_name(Isa isa);

// "scalar", "avx2" or "auto". Returns false (and leaves the path unchanged)
// if the requested ISA is not supported on this CPU.
bool set_isa(std::string_view name);

bool cpu_has_avx2();

// sum_i a[i]*b[i]
double dot(const double* a, const double* b, std::size_t n);
// y[i] += s*x[i]
void axpy(double s, const double* x, double* y, std::size_t n);
// sum_i x[i]^2
double sum_sq(const double* x, std::size_t n);

// y = W x            (W row-major, rows x cols)
void matvec(const double* w, std::size_t rows, std::size_t cols,
            const double* x, double* y);
// y += W x
void matvec_acc(const double* w, std::size_t rows, std::size_t cols,
                const double* x, double* y);
// dx += W^T d        (column access expressed as row-wise axpy)
void matvec_t_acc(const double* w, std::size_t rows, std::size_t cols,
                  const double* d, double* dx);

// Reference path, callable directly regardless of the active ISA.
namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double s, const double* x, double* y, std::size_t n);
double sum_sq(const double* x, std::size_t n);
}  // namespace scalar

#if defined(QUAKE_HAVE_AVX2_BUILD)
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double s, const double* x, double* y, std::size_t n);
double sum_sq(const double* x, std::size_t n);
}  // namespace avx2
#endif

}  // namespace quake::kern
