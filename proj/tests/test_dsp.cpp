#include "doctest.h"

#include <stdexcept>

#include <cmath>
#include <numbers>

#include "naive_ref.hpp"
#include "quake/dsp.hpp"
#include "quake/rng.hpp"

using namespace quake;

namespace {

std::vector<double> random_signal(std::size_t n, Rng& rng, double amp = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = amp * rng.normal();
  return v;
}

}  // namespace

TEST_CASE("pre-emphasis: constant signal and identity") {
  auto y = pre_emphasis(std::vector<double>{1.0, 1.0, 1.0}, 0.95);
  CHECK(y[0] == 1.0);
  CHECK(y[1] == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(y[2] == doctest::Approx(0.05).epsilon(1e-12));

  std::vector<double> x{0.3, -0.2, 0.9};
  CHECK(pre_emphasis(x, 0.0) == x);
  CHECK_THROWS(pre_emphasis(std::vector<double>{}, 0.95));
}

TEST_CASE("pre-emphasis: matches the direct formula") {
  Rng rng(2);
  const auto x = random_signal(64, rng);
  const auto y = pre_emphasis(x, 0.95);
  const auto expect = naive::pre_emphasis(x, 0.95);
  for (std::size_t t = 0; t < x.size(); ++t)
    CHECK(std::abs(y[t] - expect[t]) <= 1e-12);
}

TEST_CASE("hamming: endpoints, midpoint, symmetry, full vector") {
  for (int n : {2, 5, 24, 25, 400}) {
    auto w = hamming_window(n);
    CHECK(w[0] == doctest::Approx(0.08).epsilon(1e-12));
    CHECK(w[std::size_t(n) - 1] == doctest::Approx(0.08).epsilon(1e-12));
    for (int i = 0; i < n; ++i)
      CHECK(w[std::size_t(i)] ==
            doctest::Approx(w[std::size_t(n - 1 - i)]).epsilon(1e-15));
  }
  auto w25 = hamming_window(25);
  CHECK(w25[12] == doctest::Approx(1.0).epsilon(1e-15));  // odd N midpoint
  const auto expect = naive::hamming(25);
  for (std::size_t i = 0; i < 25; ++i)
    CHECK(std::abs(w25[i] - expect[i]) <= 1e-15);
  CHECK_THROWS(hamming_window(1));
}

TEST_CASE("framing: reference shapes and the floor rule") {
  FeatureConfig fc = FeatureConfig::reference(1000);  // 25 ms / 20 ms
  Rng rng(3);
  const auto sig = random_signal(200, rng);
  auto fm = frame_signal(sig, fc);
  CHECK(fm.n_frames == 9);
  CHECK(fm.frame_len == 25);
  CHECK(fm.frame_times[1] == doctest::Approx(0.02));

  FeatureConfig fc10 = fc;
  fc10.stride_ms = 10.0;
  CHECK(frame_signal(sig, fc10).n_frames == 18);

  const auto exact = random_signal(25, rng);
  CHECK(frame_signal(exact, fc).n_frames == 1);
  CHECK_THROWS(frame_signal(random_signal(24, rng), fc));
}

TEST_CASE("framing: frame-count law on random lengths") {
  FeatureConfig fc = FeatureConfig::reference(1000);
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 25 + rng.below(3000);
    auto fm = frame_signal(random_signal(n, rng), fc);
    CHECK(fm.n_frames == 1 + (n - 25) / 20);
  }
}

TEST_CASE("power spectrum: zero frame, impulse, dft oracle") {
  FeatureConfig fc = FeatureConfig::reference(1000);
  Rng rng(5);

  std::vector<double> zeros(50, 0.0);
  auto fm0 = frame_signal(zeros, fc);
  auto p0 = power_spectrum(fm0, fc.nfft);
  for (double v : p0.v) CHECK(v == 0.0);

  // unit impulse at n=0 picks up the window's first weight (0.08)
  std::vector<double> imp(25, 0.0);
  imp[0] = 1.0;
  auto fmi = frame_signal(imp, fc);
  auto pi = power_spectrum(fmi, fc.nfft);
  for (std::size_t k = 0; k < pi.cols; ++k)
    CHECK(pi.at(0, k) == doctest::Approx(0.08 * 0.08 / 256.0).epsilon(1e-9));

  const auto sig = random_signal(200, rng);
  auto fm = frame_signal(sig, fc);
  auto p = power_spectrum(fm, fc.nfft);
  naive::Matrix nf(fm.n_frames, fm.frame_len);
  for (std::size_t i = 0; i < fm.n_frames; ++i)
    for (std::size_t j = 0; j < fm.frame_len; ++j) nf.at(i, j) = fm.row(i)[j];
  auto np = naive::dft_power(nf, fc.nfft);
  REQUIRE(p.rows == np.rows);
  REQUIRE(p.cols == np.cols);
  for (std::size_t i = 0; i < p.v.size(); ++i) {
    CHECK(std::abs(p.v[i] - np.v[i]) <= 1e-9);
    CHECK(p.v[i] >= 0.0);
  }
  CHECK_THROWS(power_spectrum(fm, 16));  // nfft below frame length
}

TEST_CASE("power spectrum: parseval over the full fft") {
  Rng rng(6);
  const auto x = random_signal(256, rng);
  std::vector<std::complex<double>> buf(x.begin(), x.end());
  fft_inplace(buf);
  double time_energy = 0.0, freq_energy = 0.0;
  for (double v : x) time_energy += v * v;
  for (const auto& c : buf) freq_energy += std::norm(c) / 256.0;
  CHECK(freq_energy == doctest::Approx(time_energy).epsilon(1e-6));
}

TEST_CASE("mel scale: fixed points and monotonicity") {
  CHECK(hz_to_mel(0.0) == 0.0);
  CHECK(hz_to_mel(700.0) == doctest::Approx(1125.0 * std::log(2.0)).epsilon(1e-12));
  CHECK(mel_to_hz(0.0) == 0.0);
  CHECK(mel_to_hz(1125.0 * std::log(2.0)) == doctest::Approx(700.0).epsilon(1e-12));
  double prev = -1.0;
  for (double f = 0.0; f <= 500.0; f += 0.5) {
    const double m = hz_to_mel(f);
    CHECK(m > prev);
    prev = m;
  }
  CHECK_THROWS(hz_to_mel(-1.0));
  CHECK_THROWS(mel_to_hz(-1.0));
}

TEST_CASE("mel scale: exact inverse pair") {
  for (int i = 0; i <= 10000; ++i) {
    const double f = 500.0 * double(i) / 10000.0;
    CHECK(std::abs(mel_to_hz(hz_to_mel(f)) - f) <= 1e-9 * std::max(f, 1.0));
  }
}

TEST_CASE("filterbank: construction invariants") {
  FeatureConfig fc = FeatureConfig::reference(1000);
  auto fb = build_filterbank(fc);
  CHECK(fb.n_filters == 26);
  CHECK(fb.n_bins == 129);
  REQUIRE(fb.edge_freqs.size() == 28);
  for (std::size_t i = 0; i + 1 < fb.edge_freqs.size(); ++i)
    CHECK(fb.edge_freqs[i] < fb.edge_freqs[i + 1]);

  for (int j = 0; j < fb.n_filters; ++j) {
    const double* row = fb.weights.row(std::size_t(j));
    double peak = 0.0;
    int rises = 0, falls = 0;
    for (int k = 0; k < fb.n_bins; ++k) {
      CHECK(row[k] >= 0.0);
      CHECK(row[k] <= 1.0);
      peak = std::max(peak, row[k]);
      if (k > 0 && row[k] > row[k - 1]) {
        CHECK(falls == 0);  // unimodal: no rise after a fall
        ++rises;
      }
      if (k > 0 && row[k] < row[k - 1]) ++falls;
      if (k <= fb.edge_bins[std::size_t(j)] ||
          k >= fb.edge_bins[std::size_t(j) + 2])
        CHECK(row[k] == 0.0);
    }
    CHECK(peak == 1.0);
  }

  // every bin between the first peak and the last edge is covered
  for (int k = fb.edge_bins[1]; k <= fb.edge_bins[std::size_t(fb.n_filters)];
       ++k) {
    double cover = 0.0;
    for (int j = 0; j < fb.n_filters; ++j)
      cover += fb.weights.at(std::size_t(j), std::size_t(k));
    CHECK(cover > 0.0);
  }
}

TEST_CASE("filterbank: single filter spans the band") {
  FeatureConfig fc = FeatureConfig::reference(1000);
  fc.n_filters = 1;
  fc.n_ceps = 1;
  auto fb = build_filterbank(fc);
  CHECK(fb.edge_bins.front() == 0);
  CHECK(fb.edge_bins.back() == fc.nfft / 2);
}

TEST_CASE("filterbank: bin edges match the independent construction") {
  for (int rate : {1000, 200}) {
    FeatureConfig fc = FeatureConfig::reference(rate);
    auto fb = build_filterbank(fc);
    auto nfb = naive::filterbank(fc.n_filters, fc.nfft, rate);
    REQUIRE(fb.weights.v.size() == nfb.v.size());
    for (std::size_t i = 0; i < fb.weights.v.size(); ++i)
      CHECK(std::abs(fb.weights.v[i] - nfb.v[i]) <= 1e-15);
  }
}

TEST_CASE("filterbank: reports when the grid cannot fit") {
  FeatureConfig fc = FeatureConfig::reference(8000);
  fc.nfft = 64;  // 33 bins for 26 filters across a wide band
  fc.n_filters = 26;
  fc.n_ceps = 13;
  fc.frame_len_ms = 4.0;  // keep nfft >= frame length
  CHECK_THROWS_WITH_AS(build_filterbank(fc), doctest::Contains("increase nfft"),
                       std::runtime_error);
}

TEST_CASE("apply_filterbank: floor, locality, oracle") {
  FeatureConfig fc = FeatureConfig::reference(1000);
  auto fb = build_filterbank(fc);

  Mat zero_power(1, std::size_t(fb.n_bins));
  auto e0 = apply_filterbank(zero_power, fb, fc.log_floor);
  for (double v : e0.v) CHECK(v == doctest::Approx(std::log(1e-12)));

  // energy in one bin excites only the filters overlapping that bin
  Mat single(1, std::size_t(fb.n_bins));
  const std::size_t hot = 40;
  single.at(0, hot) = 2.0;
  auto e1 = apply_filterbank(single, fb, fc.log_floor);
  for (int j = 0; j < fb.n_filters; ++j) {
    const bool responds = fb.weights.at(std::size_t(j), hot) > 0.0;
    if (responds)
      CHECK(e1.at(0, std::size_t(j)) > std::log(1e-12));
    else
      CHECK(e1.at(0, std::size_t(j)) == doctest::Approx(std::log(1e-12)));
  }

  Rng rng(8);
  Mat power(5, std::size_t(fb.n_bins));
  for (auto& v : power.v) v = std::abs(rng.normal());
  auto e = apply_filterbank(power, fb, fc.log_floor);
  naive::Matrix np(power.rows, power.cols), nf(std::size_t(fb.n_filters),
                                               std::size_t(fb.n_bins));
  np.v = power.v;
  nf.v = fb.weights.v;
  auto ne = naive::log_energies(np, nf, fc.log_floor);
  for (std::size_t i = 0; i < e.v.size(); ++i)
    CHECK(std::abs(e.v[i] - ne.v[i]) <= 1e-9);

  Mat bad(1, 7);
  CHECK_THROWS(apply_filterbank(bad, fb, fc.log_floor));
}

TEST_CASE("dct: constant vector, invertibility, oracle") {
  std::vector<double> constant(26, 3.25);
  auto c = dct2_truncated(constant, 13);
  CHECK(c[0] == doctest::Approx(3.25 * std::sqrt(26.0)).epsilon(1e-12));
  for (std::size_t k = 1; k < c.size(); ++k)
    CHECK(std::abs(c[k]) <= 1e-12);

  Rng rng(9);
  std::vector<double> x(26);
  for (auto& v : x) v = rng.normal();

  // full-length transform is orthonormal: invert with the DCT-III
  auto full = dct2_truncated(x, 26);
  for (std::size_t i = 0; i < 26; ++i) {
    double acc = full[0] / std::sqrt(26.0);
    for (std::size_t k = 1; k < 26; ++k)
      acc += std::sqrt(2.0 / 26.0) * full[k] *
             std::cos(std::numbers::pi * double(k) * (2.0 * double(i) + 1.0) /
                      52.0);
    CHECK(acc == doctest::Approx(x[i]).epsilon(1e-9));
  }

  auto truncated = dct2_truncated(x, 13);
  auto expect = naive::dct2_ortho(x, 13);
  for (std::size_t k = 0; k < truncated.size(); ++k)
    CHECK(std::abs(truncated[k] - expect[k]) <= 1e-12);

  CHECK_THROWS(dct2_truncated(x, 27));
}

TEST_CASE("extract_features: shapes, silence, determinism") {
  FeatureConfig fc = FeatureConfig::reference(1000);
  Rng rng(10);
  Waveform w;
  w.sample_rate = 1000;
  w.samples.resize(200);
  for (auto& s : w.samples) s = rng.normal() * 0.2;

  auto mf = extract_features(w, fc, FeatureKind::mfcc);
  CHECK(mf.values.rows == 9);
  CHECK(mf.values.cols == 13);
  for (double v : mf.values.v) CHECK(std::isfinite(v));

  auto lf = extract_features(w, fc, FeatureKind::log_filterbank);
  CHECK(lf.values.rows == 9);
  CHECK(lf.values.cols == 26);

  Waveform silence;
  silence.sample_rate = 1000;
  silence.samples.assign(200, 0.0);
  auto sf = extract_features(silence, fc, FeatureKind::mfcc);
  for (std::size_t r = 1; r < sf.values.rows; ++r)
    for (std::size_t c = 0; c < sf.values.cols; ++c)
      CHECK(sf.values.at(r, c) == sf.values.at(0, c));

  auto mf2 = extract_features(w, fc, FeatureKind::mfcc);
  CHECK(mf.values.v == mf2.values.v);  // bitwise reproducible

  Waveform wrong = w;
  wrong.sample_rate = 200;
  CHECK_THROWS(extract_features(wrong, fc, FeatureKind::mfcc));
}

TEST_CASE("extract_features: matches the naive chain end to end") {
  FeatureConfig fc = FeatureConfig::reference(1000);
  Rng rng(123);
  for (int trial = 0; trial < 5; ++trial) {
    Waveform w;
    w.sample_rate = 1000;
    w.samples.resize(200 + rng.below(300));
    for (auto& s : w.samples) s = rng.uniform(-1.0, 1.0);
    auto got = extract_features(w, fc, FeatureKind::mfcc);
    auto expect = naive::mfcc(w.samples, 1000, fc.alpha, fc.frame_len_ms,
                              fc.stride_ms, fc.nfft, fc.n_filters, fc.n_ceps,
                              fc.log_floor);
    REQUIRE(got.values.rows == expect.rows);
    REQUIRE(got.values.cols == expect.cols);
    double worst = 0.0;
    for (std::size_t i = 0; i < got.values.v.size(); ++i)
      worst = std::max(worst, std::abs(got.values.v[i] - expect.v[i]));
    CHECK(worst <= 1e-6);
  }
}

TEST_CASE("feature csv round trip") {
  FeatureConfig fc = FeatureConfig::reference(1000);
  Rng rng(14);
  Waveform w;
  w.sample_rate = 1000;
  w.samples.resize(200);
  for (auto& s : w.samples) s = rng.normal() * 0.3;
  auto f = extract_features(w, fc, FeatureKind::mfcc);
  const auto text = feature_csv(f, fc);
  CHECK(text.find("c0,c1,") != std::string::npos);
  CHECK(text.find("# stride_ms=20") != std::string::npos);
  FeatureConfig echoed;
  auto parsed = parse_feature_csv(text, &echoed);
  REQUIRE(parsed.values.rows == f.values.rows);
  REQUIRE(parsed.values.cols == f.values.cols);
  for (std::size_t i = 0; i < f.values.v.size(); ++i)
    CHECK(parsed.values.v[i] == f.values.v[i]);
  CHECK(echoed.stride_ms == fc.stride_ms);
  CHECK(echoed.sample_rate == fc.sample_rate);
  CHECK(parsed.kind == FeatureKind::mfcc);
}
