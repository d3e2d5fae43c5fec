#pragma once

#include <array>
#include <cstdint>
#include <string>

namespace quake {

// 2x2 confusion matrix, counts[truth][prediction].
struct Confusion {
  std::array<std::array<std::uint64_t, 2>, 2> counts{};

  void add(int truth, int predicted) { ++counts[std::size_t(truth)][std::size_t(predicted)]; }
  std::uint64_t total() const;
  double accuracy() const;       // trace / total
  double kappa() const;          // (p_o - p_e) / (1 - p_e)
  double precision(int cls) const;
  double recall(int cls) const;
};

struct MetricsReport {
  Confusion confusion;
  double accuracy = 0.0;
  double cohen_kappa = 0.0;
  std::array<double, 2> precision{};
  std::array<double, 2> recall{};
  std::string config_echo;
};

MetricsReport make_report(const Confusion& c, std::string config_echo = {});

// human-readable block, also embedded in CLI output
std::string format_report(const MetricsReport& r);

}  // namespace quake
