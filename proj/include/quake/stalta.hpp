#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "quake/waveform.hpp"

namespace quake {

struct StaLtaConfig {
  double sta_window_s = 0.5;
  double lta_window_s = 10.0;
  double trigger_on = 4.0;
  double trigger_off = 2.0;  // stored for de-triggering; unused in picking

  void validate() const;
};

// ratio[i] is NaN for i < first_valid (trailing LTA window not yet full)
struct RatioSeries {
  std::vector<double> values;
  std::size_t first_valid = 0;
  int sample_rate = 0;
};

struct TriggerResult {
  RatioSeries ratio;
  std::optional<std::size_t> onset_index;  // first sample with ratio >= trigger_on
  double onset_time = 0.0;                 // seconds; meaningful when onset_index set
};

// Characteristic function is squared amplitude; STA and LTA are trailing
// means ending at the same sample. LTA floored at 1e-15.
RatioSeries sta_lta_ratio(const Waveform& w, const StaLtaConfig& config);

TriggerResult pick_onset(RatioSeries ratio, const StaLtaConfig& config);

// time,ratio rows; undefined region omitted
std::string ratio_csv(const RatioSeries& r);

}  // namespace quake
