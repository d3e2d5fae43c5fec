#include "doctest.h"

#include <stdexcept>

#include <cmath>
#include <numbers>

#include "quake/rng.hpp"
#include "quake/waveform.hpp"

using namespace quake;

namespace {

Waveform random_wave(std::size_t n, int rate, Rng& rng) {
  Waveform w;
  w.sample_rate = rate;
  w.samples.resize(n);
  for (auto& s : w.samples) s = rng.uniform(-1.0, 1.0);
  return w;
}

}  // namespace

TEST_CASE("wav: int16 scaling") {
  Waveform w;
  w.sample_rate = 200;
  w.samples = {0.0, 0.5, -1.0};
  auto bytes = write_wav(w);
  auto r = read_wav(bytes);
  CHECK(r.sample_rate == 200);
  REQUIRE(r.samples.size() == 3);
  CHECK(r.samples[0] == 0.0);
  CHECK(r.samples[1] == 0.5);
  CHECK(r.samples[2] == -1.0);
}

TEST_CASE("wav: saturation at positive full scale") {
  CHECK(quantize16(1.0) == 32767);
  CHECK(quantize16(0.0) == 0);
  CHECK(quantize16(-1.0) == -32768);
  CHECK(quantize16(2.0) == 32767);
  CHECK(quantize16(-2.0) == -32768);
}

TEST_CASE("wav: empty data chunk parses to an empty waveform") {
  Waveform w;
  w.sample_rate = 1000;
  w.samples = {0.25};
  auto bytes = write_wav(w);
  // shrink the data chunk to zero samples by hand
  bytes.resize(44);
  bytes[40] = bytes[41] = bytes[42] = bytes[43] = 0;  // data size
  const std::uint32_t riff = 36;
  bytes[4] = std::uint8_t(riff);
  bytes[5] = bytes[6] = bytes[7] = 0;
  auto r = read_wav(bytes);
  CHECK(r.samples.empty());
  CHECK(r.sample_rate == 1000);
  CHECK_THROWS(write_wav(r));  // transforms reject empty waveforms
}

TEST_CASE("wav: byte-level round trip on random files") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng.below(500);
    Waveform w = random_wave(n, 200 + int(rng.below(2000)), rng);
    auto bytes = write_wav(w);
    auto again = write_wav(read_wav(bytes));
    CHECK(bytes == again);
  }
}

TEST_CASE("wav: quantization error within one lsb") {
  Rng rng(11);
  Waveform w = random_wave(300, 1000, rng);
  auto r = read_wav(write_wav(w));
  REQUIRE(r.samples.size() == w.samples.size());
  for (std::size_t i = 0; i < w.samples.size(); ++i)
    CHECK(std::abs(r.samples[i] - w.samples[i]) <= 1.0 / 32768.0);
}

TEST_CASE("wav: malformed and unsupported inputs") {
  CHECK_THROWS_WITH_AS(read_wav(std::vector<std::uint8_t>{1, 2, 3}),
                       doctest::Contains("malformed"), std::runtime_error);
  Waveform w;
  w.sample_rate = 100;
  w.samples = {0.1, 0.2};
  auto bytes = write_wav(w);
  SUBCASE("stereo rejected") {
    bytes[22] = 2;
    CHECK_THROWS_WITH_AS(read_wav(bytes), doctest::Contains("unsupported"),
                         std::runtime_error);
  }
  SUBCASE("8-bit rejected") {
    bytes[34] = 8;
    CHECK_THROWS_WITH_AS(read_wav(bytes), doctest::Contains("unsupported"),
                         std::runtime_error);
  }
  SUBCASE("float format rejected") {
    bytes[20] = 3;
    CHECK_THROWS(read_wav(bytes));
  }
  SUBCASE("truncated payload") {
    bytes.resize(bytes.size() - 1);
    CHECK_THROWS_WITH_AS(read_wav(bytes), doctest::Contains("truncated"),
                         std::runtime_error);
  }
}

TEST_CASE("csv: header rate and values") {
  auto w = read_csv("# rate=200\n0.0\n0.1\n");
  CHECK(w.sample_rate == 200);
  REQUIRE(w.samples.size() == 2);
  CHECK(w.samples[1] == doctest::Approx(0.1));
}

TEST_CASE("csv: errors carry line numbers") {
  CHECK_THROWS_WITH_AS(read_csv("abc", 100), doctest::Contains("line 1"),
                       std::runtime_error);
  CHECK_THROWS_WITH_AS(read_csv("# rate=100\n1.5\nxyz\n"),
                       doctest::Contains("line 3"), std::runtime_error);
  CHECK_THROWS_WITH_AS(read_csv("1.0\n2.0\n"), doctest::Contains("rate"),
                       std::runtime_error);
}

TEST_CASE("csv: write-then-read is exact") {
  Rng rng(5);
  Waveform w = random_wave(1000, 640, rng);
  auto r = read_csv(write_csv(w));
  CHECK(r.sample_rate == w.sample_rate);
  REQUIRE(r.samples.size() == w.samples.size());
  for (std::size_t i = 0; i < w.samples.size(); ++i)
    CHECK(r.samples[i] == w.samples[i]);  // 17 significant digits round-trip
}

TEST_CASE("upsample: identity at equal rates") {
  Rng rng(3);
  Waveform w = random_wave(128, 500, rng);
  auto u = upsample(w, 500);
  CHECK(u.samples == w.samples);
  CHECK(u.sample_rate == 500);
}

TEST_CASE("upsample: 200 Hz to 1000 Hz length") {
  Rng rng(4);
  Waveform w = random_wave(400, 200, rng);  // 2 s
  auto u = upsample(w, 1000);
  CHECK(u.sample_rate == 1000);
  CHECK(std::llabs(long(u.samples.size()) - 2000) <= 1);
}

TEST_CASE("upsample: band-limited tone survives") {
  Waveform w;
  w.sample_rate = 200;
  w.samples.resize(800);  // 4 s
  for (std::size_t i = 0; i < w.samples.size(); ++i)
    w.samples[i] = std::sin(2.0 * std::numbers::pi * 10.0 * double(i) / 200.0);
  auto u = upsample(w, 1000);

  // rectangular DFT over the middle 2 s (integer cycle count at 10 Hz)
  const std::size_t off = 1000, n = 2000;
  double re = 0, im = 0, total = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double v = u.samples[off + k];
    const double ang = 2.0 * std::numbers::pi * 10.0 * double(k) / 1000.0;
    re += v * std::cos(ang);
    im -= v * std::sin(ang);
    total += v * v;
  }
  const double amp = 2.0 * std::sqrt(re * re + im * im) / double(n);
  CHECK(amp == doctest::Approx(1.0).epsilon(0.01));
  const double tone_energy = 2.0 * (re * re + im * im) / double(n);
  const double leak = (total - tone_energy) / total;
  CHECK(10.0 * std::log10(std::max(leak, 1e-30)) <= -60.0);
}

TEST_CASE("upsample: duration preserved within one output sample") {
  Rng rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const int src = 100 + int(rng.below(900));
    const int dst = src + int(rng.below(2000));
    Waveform w = random_wave(50 + rng.below(1000), src, rng);
    auto u = upsample(w, dst);
    CHECK(std::abs(u.duration_s() - w.duration_s()) <= 1.0 / dst + 1e-12);
  }
}

TEST_CASE("upsample: rejects downsampling and empty input") {
  Rng rng(1);
  Waveform w = random_wave(100, 1000, rng);
  CHECK_THROWS_WITH_AS(upsample(w, 200), doctest::Contains("downsampling"),
                       std::runtime_error);
  Waveform empty;
  empty.sample_rate = 100;
  CHECK_THROWS(upsample(empty, 200));
}

TEST_CASE("normalize: examples and idempotence") {
  Waveform w;
  w.sample_rate = 10;
  w.samples = {0.5, -0.25};
  auto n = normalize(w);
  CHECK(n.samples[0] == 1.0);
  CHECK(n.samples[1] == -0.5);

  Waveform one;
  one.sample_rate = 10;
  one.samples = {1.0};
  CHECK(normalize(one).samples[0] == 1.0);

  Rng rng(17);
  Waveform r = random_wave(333, 100, rng);
  auto n1 = normalize(r);
  double peak = 0.0;
  for (double s : n1.samples) peak = std::max(peak, std::abs(s));
  CHECK(peak == 1.0);
  auto n2 = normalize(n1);
  CHECK(n1.samples == n2.samples);

  Waveform zeros;
  zeros.sample_rate = 10;
  zeros.samples = {0.0, 0.0};
  CHECK_THROWS_WITH_AS(normalize(zeros), doctest::Contains("all-zero"),
                       std::runtime_error);
}

TEST_CASE("manifest round trip and validation") {
  std::vector<DatasetEntry> entries{
      {"wav/q0000.wav", Label::earthquake, Split::train},
      {"wav/n0000.wav", Label::non_earthquake, Split::test},
  };
  auto text = write_manifest(entries);
  auto parsed = read_manifest(text);
  CHECK(parsed == entries);

  CHECK_THROWS_WITH_AS(read_manifest("path,label,split\nx.wav,quakeish,train\n"),
                       doctest::Contains("unknown label"), std::runtime_error);
  CHECK_THROWS_WITH_AS(
      read_manifest("path,label,split\na.wav,earthquake,train\na.wav,earthquake,test\n"),
      doctest::Contains("duplicate"), std::runtime_error);
}
