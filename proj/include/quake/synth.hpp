#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "quake/rng.hpp"
#include "quake/waveform.hpp"

namespace quake {

// Seeded synthetic corpus standing in for field recordings.
//
// Earthquake clips: band-limited (1-40 Hz) chirp with a sharp onset and a
// decaying coda over pink background noise. Non-earthquake clips rotate
// through stationary noise, impulsive glitches, and monotone hum variants.
struct SynthConfig {
  int n_quake = 310;
  int n_noise = 300;
  int sample_rate = 1000;
  double duration_s = 0.2;
  // onset window for event traces; both zero means the event fills the clip
  double onset_min_s = 0.0;
  double onset_max_s = 0.0;
  std::uint64_t seed = 7;
  double train_fraction = 0.8;
};

struct SynthEntry {
  Waveform wave;
  Label label = Label::non_earthquake;
  Split split = Split::train;
  double onset_s = -1.0;  // event start within the trace; -1 for noise
  std::string name;       // file stem, e.g. "q0007"
};

// Deterministic in every byte for a fixed config.
std::vector<SynthEntry> synth_dataset(const SynthConfig& config);

// individual generators (used by the dataset builder and by tests)
Waveform synth_quake(int rate, double duration_s, double onset_s, Rng& rng);
Waveform synth_noise(int rate, double duration_s, int variant, Rng& rng);

// stationary noise whose variance steps up by `amp_factor` at onset_s
Waveform synth_step_trace(int rate, double duration_s, double onset_s,
                          double amp_factor, Rng& rng);
// low noise with one full-scale single-sample spike at spike_s
Waveform synth_glitch_trace(int rate, double duration_s, double spike_s,
                            Rng& rng);

// onsets sidecar (path,onset_s; -1 for noise)
std::string write_onsets_csv(const std::vector<SynthEntry>& entries,
                             const std::string& dir_prefix);

}  // namespace quake
