#include "doctest.h"

#include <stdexcept>

#include <cmath>
#include <set>

#include "quake/synth.hpp"

using namespace quake;

TEST_CASE("dataset: counts, balance, and split fractions") {
  SynthConfig cfg;
  cfg.n_quake = 31;
  cfg.n_noise = 30;
  cfg.sample_rate = 200;
  cfg.duration_s = 0.5;
  cfg.seed = 7;
  auto entries = synth_dataset(cfg);
  REQUIRE(entries.size() == 61);

  int quakes = 0, noise = 0, train = 0;
  std::set<std::string> names;
  for (const auto& e : entries) {
    (e.label == Label::earthquake ? quakes : noise)++;
    if (e.split == Split::train) ++train;
    names.insert(e.name);
    CHECK(e.wave.samples.size() == 100);
    for (double s : e.wave.samples) {
      CHECK(std::isfinite(s));
      CHECK(std::abs(s) <= 1.0);
    }
  }
  CHECK(quakes == 31);
  CHECK(noise == 30);
  CHECK(names.size() == 61);  // unique stems
  CHECK(train == std::llround(0.8 * 31) + std::llround(0.8 * 30));
}

TEST_CASE("dataset: deterministic byte for byte") {
  SynthConfig cfg;
  cfg.n_quake = 6;
  cfg.n_noise = 6;
  cfg.sample_rate = 1000;
  cfg.duration_s = 0.2;
  cfg.seed = 42;
  auto a = synth_dataset(cfg);
  auto b = synth_dataset(cfg);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(write_wav(a[i].wave) == write_wav(b[i].wave));
    CHECK(a[i].split == b[i].split);
    CHECK(a[i].onset_s == b[i].onset_s);
  }

  cfg.seed = 43;
  auto c = synth_dataset(cfg);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].wave.samples != c[i].wave.samples) any_diff = true;
  CHECK(any_diff);
}

TEST_CASE("trace mode: onsets recorded inside the requested range") {
  SynthConfig cfg;
  cfg.n_quake = 5;
  cfg.n_noise = 5;
  cfg.sample_rate = 200;
  cfg.duration_s = 20.0;
  cfg.onset_min_s = 12.0;
  cfg.onset_max_s = 15.0;
  cfg.seed = 3;
  auto entries = synth_dataset(cfg);
  for (const auto& e : entries) {
    if (e.label == Label::earthquake) {
      CHECK(e.onset_s >= 12.0);
      CHECK(e.onset_s <= 15.0);
      // quiet before the onset, lively after
      double pre = 0.0, post = 0.0;
      const std::size_t on = std::size_t(e.onset_s * 200);
      for (std::size_t i = 0; i < on; ++i)
        pre = std::max(pre, std::abs(e.wave.samples[i]));
      for (std::size_t i = on; i < e.wave.samples.size(); ++i)
        post = std::max(post, std::abs(e.wave.samples[i]));
      CHECK(post > 2.0 * pre);
    } else {
      CHECK(e.onset_s == -1.0);
    }
  }
}

TEST_CASE("onsets csv sidecar") {
  SynthConfig cfg;
  cfg.n_quake = 2;
  cfg.n_noise = 1;
  cfg.sample_rate = 100;
  cfg.duration_s = 1.0;
  auto entries = synth_dataset(cfg);
  auto text = write_onsets_csv(entries, "wav/");
  CHECK(text.find("path,onset_s") == 0);
  CHECK(text.find("wav/q0000.wav,") != std::string::npos);
  CHECK(text.find("wav/n0000.wav,-1") != std::string::npos);
}

TEST_CASE("generator guards") {
  SynthConfig cfg;
  cfg.n_quake = 0;
  CHECK_THROWS(synth_dataset(cfg));
  cfg = SynthConfig{};
  cfg.onset_min_s = 0.3;
  cfg.onset_max_s = 0.25;
  CHECK_THROWS(synth_dataset(cfg));
  cfg = SynthConfig{};
  cfg.onset_max_s = 0.3;  // beyond the 0.2 s clip
  cfg.onset_min_s = 0.25;
  CHECK_THROWS(synth_dataset(cfg));
}
