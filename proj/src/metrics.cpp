#include "quake/metrics.hpp"

#include <cmath>
#include <sstream>

namespace quake {

std::uint64_t Confusion::total() const {
  return counts[0][0] + counts[0][1] + counts[1][0] + counts[1][1];
}

double Confusion::accuracy() const {
  const std::uint64_t n = total();
  if (n == 0) return 0.0;
  return double(counts[0][0] + counts[1][1]) / double(n);
}

double Confusion::kappa() const {
  const double n = double(total());
  if (n == 0) return 0.0;
  const double po = accuracy();
  const double row0 = double(counts[0][0] + counts[0][1]);
  const double row1 = double(counts[1][0] + counts[1][1]);
  const double col0 = double(counts[0][0] + counts[1][0]);
  const double col1 = double(counts[0][1] + counts[1][1]);
  const double pe = (row0 * col0 + row1 * col1) / (n * n);
  if (std::abs(1.0 - pe) < 1e-15) return po >= 1.0 ? 1.0 : 0.0;
  return (po - pe) / (1.0 - pe);
}

double Confusion::precision(int cls) const {
  const std::size_t k = std::size_t(cls);
  const double col = double(counts[0][k] + counts[1][k]);
  return col > 0 ? double(counts[k][k]) / col : 0.0;
}

double Confusion::recall(int cls) const {
  const std::size_t k = std::size_t(cls);
  const double row = double(counts[k][0] + counts[k][1]);
  return row > 0 ? double(counts[k][k]) / row : 0.0;
}

MetricsReport make_report(const Confusion& c, std::string config_echo) {
  MetricsReport r;
  r.confusion = c;
  r.accuracy = c.accuracy();
  r.cohen_kappa = c.kappa();
  r.precision = {c.precision(0), c.precision(1)};
  r.recall = {c.recall(0), c.recall(1)};
  r.config_echo = std::move(config_echo);
  return r;
}

std::string format_report(const MetricsReport& r) {
  std::ostringstream os;
  os.precision(6);
  const auto& c = r.confusion.counts;
  os << "confusion (rows=truth, cols=predicted; 0=earthquake, 1=non_earthquake)\n";
  os << "  [" << c[0][0] << ", " << c[0][1] << "]\n";
  os << "  [" << c[1][0] << ", " << c[1][1] << "]\n";
  os << "accuracy:    " << r.accuracy << "\n";
  os << "cohen_kappa: " << r.cohen_kappa << "\n";
  os << "precision:   earthquake=" << r.precision[0]
     << " non_earthquake=" << r.precision[1] << "\n";
  os << "recall:      earthquake=" << r.recall[0]
     << " non_earthquake=" << r.recall[1] << "\n";
  if (!r.config_echo.empty()) os << "config: " << r.config_echo << "\n";
  return os.str();
}

}  // namespace quake
