#pragma once

// Central finite-difference gradient checking shared by the unit tests and
// the acceptance suite.

#include <cmath>
#include <functional>
#include <vector>

namespace gradcheck {

inline constexpr double kStep = 1e-5;

// worst relative error between an analytic gradient and central differences
// of `loss` over the entries of `values`
inline double max_rel_error(std::vector<double>& values,
                            const std::vector<double>& analytic,
                            const std::function<double()>& loss) {
  double worst = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double keep = values[i];
    values[i] = keep + kStep;
    const double up = loss();
    values[i] = keep - kStep;
    const double down = loss();
    values[i] = keep;
    const double numeric = (up - down) / (2.0 * kStep);
    const double denom =
        std::max({std::abs(numeric), std::abs(analytic[i]), 1.0});
    worst = std::max(worst, std::abs(numeric - analytic[i]) / denom);
  }
  return worst;
}

}  // namespace gradcheck
