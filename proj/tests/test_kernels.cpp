#include "doctest.h"

#include <cmath>
#include <vector>

#include "quake/kernels.hpp"
#include "quake/rng.hpp"

using namespace quake;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

}  // namespace

TEST_CASE("scalar and avx2 kernels agree") {
  if (!kern::cpu_has_avx2()) return;  // nothing to compare on this machine
  Rng rng(1234);
  for (std::size_t n : {std::size_t(0), std::size_t(1), std::size_t(3),
                        std::size_t(4), std::size_t(7), std::size_t(8),
                        std::size_t(33), std::size_t(128), std::size_t(1000)}) {
    const auto a = random_vec(n, rng);
    const auto b = random_vec(n, rng);

    double mag = 1.0;
    for (std::size_t i = 0; i < n; ++i) mag += std::abs(a[i] * b[i]);

    const double ds = kern::scalar::dot(a.data(), b.data(), n);
#if defined(QUAKE_HAVE_AVX2_BUILD)
    const double dv = kern::avx2::dot(a.data(), b.data(), n);
    CHECK(std::abs(ds - dv) <= 1e-13 * mag);

    const double ss = kern::scalar::sum_sq(a.data(), n);
    const double sv = kern::avx2::sum_sq(a.data(), n);
    CHECK(std::abs(ss - sv) <= 1e-13 * mag);

    auto ys = random_vec(n, rng);
    auto yv = ys;
    kern::scalar::axpy(0.37, a.data(), ys.data(), n);
    kern::avx2::axpy(0.37, a.data(), yv.data(), n);
    for (std::size_t i = 0; i < n; ++i)
      CHECK(std::abs(ys[i] - yv[i]) <= 1e-14 * (1.0 + std::abs(ys[i])));
#endif
  }
}

TEST_CASE("isa selection") {
  const auto before = kern::active();
  CHECK(kern::set_isa("scalar"));
  CHECK(kern::active() == kern::Isa::scalar);
  CHECK_FALSE(kern::set_isa("pentium"));
  if (kern::cpu_has_avx2()) {
    CHECK(kern::set_isa("avx2"));
    CHECK(kern::active() == kern::Isa::avx2);
  } else {
    CHECK_FALSE(kern::set_isa("avx2"));
  }
  CHECK(kern::set_isa("auto"));
  kern::set_isa(kern::isa_name(before));
}

TEST_CASE("matvec forms match hand expansion") {
  Rng rng(99);
  const std::size_t rows = 5, cols = 7;
  const auto w = random_vec(rows * cols, rng);
  const auto x = random_vec(cols, rng);
  const auto d = random_vec(rows, rng);

  std::vector<double> y(rows, 0.0);
  kern::matvec(w.data(), rows, cols, x.data(), y.data());
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += w[r * cols + c] * x[c];
    CHECK(y[r] == doctest::Approx(acc).epsilon(1e-12));
  }

  std::vector<double> dx(cols, 0.0);
  kern::matvec_t_acc(w.data(), rows, cols, d.data(), dx.data());
  for (std::size_t c = 0; c < cols; ++c) {
    double acc = 0.0;
    for (std::size_t r = 0; r < rows; ++r) acc += w[r * cols + c] * d[r];
    CHECK(dx[c] == doctest::Approx(acc).epsilon(1e-12));
  }

  std::vector<double> y2 = y;
  kern::matvec_acc(w.data(), rows, cols, x.data(), y2.data());
  for (std::size_t r = 0; r < rows; ++r)
    CHECK(y2[r] == doctest::Approx(2.0 * y[r]).epsilon(1e-12));
}
