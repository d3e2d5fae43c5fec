#include "doctest.h"

#include <stdexcept>

#include <cmath>

#include "quake/metrics.hpp"
#include "quake/rng.hpp"

using namespace quake;

TEST_CASE("perfect agreement") {
  Confusion c;
  c.counts = {{{10, 0}, {0, 10}}};
  CHECK(c.accuracy() == 1.0);
  CHECK(c.kappa() == 1.0);
  CHECK(c.precision(0) == 1.0);
  CHECK(c.recall(1) == 1.0);
}

TEST_CASE("label-independent predictions have near-zero kappa") {
  Rng rng(42);
  Confusion c;
  for (int i = 0; i < 10000; ++i) {
    const int truth = rng.uniform() < 0.5 ? 0 : 1;
    const int pred = rng.uniform() < 0.5 ? 0 : 1;
    c.add(truth, pred);
  }
  CHECK(std::abs(c.kappa()) < 0.05);
}

TEST_CASE("hand-checked confusion matrix") {
  Confusion c;
  c.counts = {{{40, 10}, {5, 45}}};
  CHECK(c.accuracy() == doctest::Approx(0.85));
  // direct formula: po = 0.85, pe = (50*45 + 50*55) / 100^2 = 0.5
  const double po = 0.85, pe = 0.5;
  CHECK(c.kappa() == doctest::Approx((po - pe) / (1.0 - pe)).epsilon(1e-12));
  CHECK(c.kappa() == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(c.precision(0) == doctest::Approx(40.0 / 45.0));
  CHECK(c.recall(0) == doctest::Approx(0.8));
}

TEST_CASE("kappa and accuracy stay mutually consistent") {
  Rng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    Confusion c;
    for (int i = 0; i < 200; ++i)
      c.add(int(rng.below(2)), int(rng.below(2)));
    const double n = double(c.total());
    const double po = double(c.counts[0][0] + c.counts[1][1]) / n;
    CHECK(c.accuracy() == doctest::Approx(po).epsilon(1e-12));
    const double row0 = double(c.counts[0][0] + c.counts[0][1]);
    const double col0 = double(c.counts[0][0] + c.counts[1][0]);
    const double pe =
        (row0 * col0 + (n - row0) * (n - col0)) / (n * n);
    if (std::abs(1.0 - pe) > 1e-15)
      CHECK(c.kappa() == doctest::Approx((po - pe) / (1.0 - pe)).epsilon(1e-12));
  }
}

TEST_CASE("degenerate single-class matrix") {
  Confusion c;
  c.counts = {{{25, 0}, {0, 0}}};
  CHECK(c.accuracy() == 1.0);
  CHECK(c.kappa() == 1.0);  // defined as full credit for perfect agreement
  Confusion wrong;
  wrong.counts = {{{0, 25}, {0, 0}}};
  CHECK(wrong.kappa() == 0.0);
}

TEST_CASE("report formatting carries the numbers") {
  Confusion c;
  c.counts = {{{40, 10}, {5, 45}}};
  auto rep = make_report(c, "rate=1000Hz");
  CHECK(rep.accuracy == doctest::Approx(0.85));
  CHECK(rep.cohen_kappa == doctest::Approx(0.7));
  auto text = format_report(rep);
  CHECK(text.find("0.85") != std::string::npos);
  CHECK(text.find("rate=1000Hz") != std::string::npos);
}
