#include "quake/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace quake {

namespace {

// Paul Kellet's economy pink noise filter over white input. The pole state
// is primed so output is stationary from the first sample.
struct PinkNoise {
  double b0 = 0, b1 = 0, b2 = 0;

  explicit PinkNoise(Rng& rng) {
    for (int i = 0; i < 1024; ++i) next(rng);
  }

  double next(Rng& rng) {
    const double white = rng.normal();
    b0 = 0.99765 * b0 + white * 0.0990460;
    b1 = 0.96300 * b1 + white * 0.2965164;
    b2 = 0.57000 * b2 + white * 1.0526913;
    return (b0 + b1 + b2 + white * 0.1848) * 0.2;
  }
};

void soft_clip(std::vector<double>& s) {
  for (double& v : s) v = std::tanh(v);
}

}  // namespace

Waveform synth_quake(int rate, double duration_s, double onset_s, Rng& rng) {
  const std::size_t n = std::size_t(std::llround(duration_s * rate));
  if (n == 0) throw std::runtime_error("synth: zero-length clip");
  Waveform w;
  w.sample_rate = rate;
  w.samples.assign(n, 0.0);

  const double nyquist = rate / 2.0;
  // band 1-40 Hz, kept under the Nyquist of low-rate variants
  const double f_hi = std::min(rng.uniform(18.0, 40.0), 0.45 * nyquist);
  const double f_lo = rng.uniform(1.0, 8.0);
  const double amp = rng.uniform(0.35, 0.9);
  const double attack_s = rng.uniform(0.02, 0.08);
  // event time constants are physical, not tied to the clip length
  const double coda_tau = rng.uniform(0.5, 3.0);
  const double phase0 = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double noise_amp = rng.uniform(0.01, 0.04);
  // sweep spans the bulk of the coda; short clips are a slice of an ongoing
  // event rather than always starting at the onset
  const double event_len = 3.0 * coda_tau;
  const double slice_offset =
      onset_s > 0.0 ? 0.0 : rng.uniform(0.0, 0.8 * coda_tau);

  PinkNoise pink(rng);
  double phase = phase0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = double(i) / rate;
    double v = noise_amp * pink.next(rng);
    if (t >= onset_s) {
      const double te = t - onset_s + slice_offset;
      // downward sweep: high-frequency arrival first, then the slow coda
      const double frac = std::min(1.0, te / event_len);
      const double f = f_hi + (f_lo - f_hi) * frac;
      phase += 2.0 * std::numbers::pi * f / rate;
      const double env = (1.0 - std::exp(-te / attack_s)) * std::exp(-te / coda_tau);
      v += amp * env * std::sin(phase);
      // a little wideband shaking on top of the tone
      v += 0.15 * amp * env * pink.next(rng);
    }
    w.samples[i] = v;
  }
  soft_clip(w.samples);
  return w;
}

Waveform synth_noise(int rate, double duration_s, int variant, Rng& rng) {
  const std::size_t n = std::size_t(std::llround(duration_s * rate));
  if (n == 0) throw std::runtime_error("synth: zero-length clip");
  Waveform w;
  w.sample_rate = rate;
  w.samples.assign(n, 0.0);

  switch (variant % 3) {
    case 0: {  // stationary broadband noise (white or pink, quiet to loud)
      const bool pink_kind = rng.uniform() < 0.5;
      const double amp = rng.uniform(0.01, 0.5);
      PinkNoise pink(rng);
      for (auto& s : w.samples)
        s = amp * (pink_kind ? pink.next(rng) : rng.normal() * 0.5);
      break;
    }
    case 1: {  // impulsive glitches over a quiet floor
      const double floor_amp = rng.uniform(0.005, 0.02);
      for (auto& s : w.samples) s = floor_amp * rng.normal();
      const int spikes = 1 + int(rng.below(4));
      for (int k = 0; k < spikes; ++k) {
        const std::size_t pos = std::size_t(rng.below(n));
        const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
        w.samples[pos] += sign * rng.uniform(0.5, 0.95);
      }
      break;
    }
    default: {  // monotone hum, optionally with a weak harmonic
      const double nyquist = rate / 2.0;
      const double f0_hi = std::max(46.0, std::min(70.0, 0.48 * nyquist));
      const double f0 = rng.uniform(std::min(45.0, f0_hi - 1.0), f0_hi);
      const double amp = rng.uniform(0.2, 0.6);
      const double harm = rng.uniform() < 0.5 ? rng.uniform(0.1, 0.3) : 0.0;
      const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double noise_amp = rng.uniform(0.005, 0.03);
      for (std::size_t i = 0; i < n; ++i) {
        const double t = double(i) / rate;
        w.samples[i] = amp * std::sin(2.0 * std::numbers::pi * f0 * t + phase) +
                       harm * amp *
                           std::sin(2.0 * std::numbers::pi * 2.0 * f0 * t) +
                       noise_amp * rng.normal();
      }
      break;
    }
  }
  soft_clip(w.samples);
  return w;
}

Waveform synth_step_trace(int rate, double duration_s, double onset_s,
                          double amp_factor, Rng& rng) {
  const std::size_t n = std::size_t(std::llround(duration_s * rate));
  Waveform w;
  w.sample_rate = rate;
  w.samples.assign(n, 0.0);
  const double base = 0.02;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = double(i) / rate;
    const double amp = t >= onset_s ? base * amp_factor : base;
    w.samples[i] = amp * rng.normal();
  }
  return w;
}

Waveform synth_glitch_trace(int rate, double duration_s, double spike_s,
                            Rng& rng) {
  const std::size_t n = std::size_t(std::llround(duration_s * rate));
  Waveform w;
  w.sample_rate = rate;
  w.samples.assign(n, 0.0);
  for (auto& s : w.samples) s = 0.02 * rng.normal();
  const std::size_t pos =
      std::min(n - 1, std::size_t(std::llround(spike_s * rate)));
  w.samples[pos] = 0.9;
  return w;
}

std::vector<SynthEntry> synth_dataset(const SynthConfig& config) {
  if (config.n_quake < 1 || config.n_noise < 1)
    throw std::runtime_error("synth: need at least one clip per class");
  if (config.sample_rate <= 0 || config.duration_s <= 0.0)
    throw std::runtime_error("synth: invalid rate or duration");
  if (config.onset_max_s < config.onset_min_s ||
      config.onset_max_s >= config.duration_s)
    throw std::runtime_error("synth: onset window outside the trace");

  std::vector<SynthEntry> entries;
  entries.reserve(std::size_t(config.n_quake + config.n_noise));

  for (int i = 0; i < config.n_quake; ++i) {
    Rng rng(Rng::mix(config.seed, 0x51000000u + std::uint64_t(i)));
    SynthEntry e;
    e.onset_s = config.onset_max_s > 0.0
                    ? rng.uniform(config.onset_min_s, config.onset_max_s)
                    : 0.0;
    e.wave = synth_quake(config.sample_rate, config.duration_s, e.onset_s, rng);
    e.label = Label::earthquake;
    char buf[16];
    std::snprintf(buf, sizeof buf, "q%04d", i);
    e.name = buf;
    e.wave.source_id = e.name;
    entries.push_back(std::move(e));
  }
  for (int i = 0; i < config.n_noise; ++i) {
    Rng rng(Rng::mix(config.seed, 0x4e000000u + std::uint64_t(i)));
    SynthEntry e;
    e.wave = synth_noise(config.sample_rate, config.duration_s, i, rng);
    e.label = Label::non_earthquake;
    e.onset_s = -1.0;
    char buf[16];
    std::snprintf(buf, sizeof buf, "n%04d", i);
    e.name = buf;
    e.wave.source_id = e.name;
    entries.push_back(std::move(e));
  }

  // stratified train/test split, seeded
  Rng split_rng(Rng::mix(config.seed, 0x5b717u));
  for (int cls = 0; cls < 2; ++cls) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < entries.size(); ++i)
      if ((entries[i].label == Label::earthquake) == (cls == 0)) idx.push_back(i);
    shuffle(idx, split_rng);
    const std::size_t n_train =
        std::size_t(std::llround(config.train_fraction * double(idx.size())));
    for (std::size_t k = 0; k < idx.size(); ++k)
      entries[idx[k]].split = k < n_train ? Split::train : Split::test;
  }
  return entries;
}

std::string write_onsets_csv(const std::vector<SynthEntry>& entries,
                             const std::string& dir_prefix) {
  std::ostringstream os;
  os.precision(9);
  os << "path,onset_s\n";
  for (const auto& e : entries)
    os << dir_prefix << e.name << ".wav," << e.onset_s << "\n";
  return os.str();
}

}  // namespace quake
