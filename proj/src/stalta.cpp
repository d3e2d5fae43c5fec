#include "quake/stalta.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace quake {

void StaLtaConfig::validate() const {
  if (!(sta_window_s > 0.0) || !(sta_window_s < lta_window_s))
    throw std::runtime_error("stalta: need 0 < sta_window < lta_window");
  if (!(trigger_on > 1.0))
    throw std::runtime_error("stalta: trigger_on must exceed 1");
  if (trigger_off > trigger_on)
    throw std::runtime_error("stalta: trigger_off must not exceed trigger_on");
}

RatioSeries sta_lta_ratio(const Waveform& w, const StaLtaConfig& config) {
  config.validate();
  if (w.sample_rate <= 0) throw std::runtime_error("stalta: invalid sample rate");
  const std::size_t ns = std::size_t(std::llround(config.sta_window_s * w.sample_rate));
  const std::size_t nl = std::size_t(std::llround(config.lta_window_s * w.sample_rate));
  if (ns < 1) throw std::runtime_error("stalta: STA window below one sample");
  if (w.samples.size() <= nl)
    throw std::runtime_error("stalta: waveform shorter than the LTA window");

  const std::size_t n = w.samples.size();
  // prefix sums of the squared amplitude characteristic function
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    prefix[i + 1] = prefix[i] + w.samples[i] * w.samples[i];

  RatioSeries r;
  r.sample_rate = w.sample_rate;
  r.first_valid = nl - 1;
  r.values.assign(n, std::numeric_limits<double>::quiet_NaN());
  constexpr double kLtaFloor = 1e-15;
  for (std::size_t i = nl - 1; i < n; ++i) {
    const double sta = (prefix[i + 1] - prefix[i + 1 - ns]) / double(ns);
    const double lta = (prefix[i + 1] - prefix[i + 1 - nl]) / double(nl);
    r.values[i] = sta / std::max(lta, kLtaFloor);
  }
  return r;
}

TriggerResult pick_onset(RatioSeries ratio, const StaLtaConfig& config) {
  config.validate();
  TriggerResult res;
  for (std::size_t i = ratio.first_valid; i < ratio.values.size(); ++i) {
    if (ratio.values[i] >= config.trigger_on) {
      res.onset_index = i;
      res.onset_time = double(i) / ratio.sample_rate;
      break;
    }
  }
  res.ratio = std::move(ratio);
  return res;
}

std::string ratio_csv(const RatioSeries& r) {
  std::ostringstream os;
  os.precision(12);
  os << "time,ratio\n";
  for (std::size_t i = r.first_valid; i < r.values.size(); ++i)
    os << double(i) / r.sample_rate << ',' << r.values[i] << "\n";
  return os.str();
}

}  // namespace quake
