#include "quake/waveform.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace quake {

namespace {

std::uint32_t read_u32le(const std::uint8_t* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 |
         std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
}

std::uint16_t read_u16le(const std::uint8_t* p) {
  return std::uint16_t(p[0] | p[1] << 8);
}

void put_u32le(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(std::uint8_t(v));
  out.push_back(std::uint8_t(v >> 8));
  out.push_back(std::uint8_t(v >> 16));
  out.push_back(std::uint8_t(v >> 24));
}

void put_u16le(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(std::uint8_t(v));
  out.push_back(std::uint8_t(v >> 8));
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

bool tag_is(const std::uint8_t* p, const char* tag) {
  return std::memcmp(p, tag, 4) == 0;
}

}  // namespace

std::int16_t quantize16(double x) {
  double c = std::clamp(x, -1.0, 1.0);
  long v = std::lround(c * 32768.0);  // lround: half away from zero
  v = std::clamp(v, -32768L, 32767L);
  return std::int16_t(v);
}

Waveform read_wav(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || !tag_is(bytes.data(), "RIFF") ||
      !tag_is(bytes.data() + 8, "WAVE"))
    throw std::runtime_error("wav: malformed header (not RIFF/WAVE)");

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const std::uint8_t* data = nullptr;
  std::uint32_t data_len = 0;
  bool have_data = false;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* hdr = bytes.data() + pos;
    std::uint32_t chunk_len = read_u32le(hdr + 4);
    std::size_t body = pos + 8;
    if (tag_is(hdr, "fmt ")) {
      if (chunk_len < 16 || body + 16 > bytes.size())
        throw std::runtime_error("wav: truncated fmt chunk");
      const std::uint8_t* f = bytes.data() + body;
      format = read_u16le(f);
      channels = read_u16le(f + 2);
      rate = read_u32le(f + 4);
      bits = read_u16le(f + 14);
      have_fmt = true;
    } else if (tag_is(hdr, "data")) {
      if (body + chunk_len > bytes.size())
        throw std::runtime_error("wav: truncated data payload");
      data = bytes.data() + body;
      data_len = chunk_len;
      have_data = true;
    }
    pos = body + chunk_len + (chunk_len & 1);  // chunks are word-aligned
  }

  if (!have_fmt || !have_data)
    throw std::runtime_error("wav: malformed header (missing fmt or data chunk)");
  if (format != 1 || channels != 1 || bits != 16)
    throw std::runtime_error(
        "wav: unsupported encoding (need 16-bit PCM mono, got format=" +
        std::to_string(format) + " channels=" + std::to_string(channels) +
        " bits=" + std::to_string(bits) + ")");
  if (rate == 0) throw std::runtime_error("wav: zero sample rate");
  if (data_len % 2 != 0) throw std::runtime_error("wav: odd data length");

  Waveform w;
  w.sample_rate = int(rate);
  w.samples.resize(data_len / 2);
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    std::int16_t s = std::int16_t(read_u16le(data + 2 * i));
    w.samples[i] = double(s) / 32768.0;
  }
  return w;
}

std::vector<std::uint8_t> write_wav(const Waveform& w) {
  if (w.samples.empty()) throw std::runtime_error("wav: empty waveform");
  if (w.sample_rate <= 0) throw std::runtime_error("wav: invalid sample rate");

  const std::uint32_t data_len = std::uint32_t(w.samples.size() * 2);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_len);
  put_tag(out, "RIFF");
  put_u32le(out, 36 + data_len);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32le(out, 16);
  put_u16le(out, 1);  // PCM
  put_u16le(out, 1);  // mono
  put_u32le(out, std::uint32_t(w.sample_rate));
  put_u32le(out, std::uint32_t(w.sample_rate) * 2);  // byte rate
  put_u16le(out, 2);                                 // block align
  put_u16le(out, 16);                                // bits
  put_tag(out, "data");
  put_u32le(out, data_len);
  for (double s : w.samples) put_u16le(out, std::uint16_t(quantize16(s)));
  return out;
}

Waveform read_csv(std::string_view text, int rate_hint) {
  Waveform w;
  int rate = rate_hint;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    std::string_view line = text.substr(
        pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
    ++line_no;
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;

    while (!line.empty() && (line.back() == '\r' || line.back() == ' '))
      line.remove_suffix(1);
    while (!line.empty() && line.front() == ' ') line.remove_prefix(1);
    if (line.empty()) continue;
    if (line.front() == '#') {
      std::size_t eq = line.find("rate=");
      if (eq != std::string_view::npos) {
        std::string_view num = line.substr(eq + 5);
        int r = 0;
        auto [p, ec] = std::from_chars(num.data(), num.data() + num.size(), r);
        if (ec != std::errc{} || r <= 0)
          throw std::runtime_error("csv: bad rate header at line " +
                                   std::to_string(line_no));
        rate = r;
      }
      continue;
    }
    double v = 0.0;
    auto [p, ec] = std::from_chars(line.data(), line.data() + line.size(), v);
    if (ec != std::errc{} || p != line.data() + line.size())
      throw std::runtime_error("csv: non-numeric value at line " +
                               std::to_string(line_no));
    w.samples.push_back(v);
  }
  if (rate <= 0)
    throw std::runtime_error("csv: sample rate missing (no '# rate=<Hz>' header)");
  w.sample_rate = rate;
  return w;
}

std::string write_csv(const Waveform& w) {
  std::ostringstream os;
  os << "# rate=" << w.sample_rate << "\n";
  os.precision(17);
  for (double s : w.samples) os << s << "\n";
  return os.str();
}

namespace {

// zero-order modified Bessel function of the first kind
double bessel_i0(double x) {
  double sum = 1.0, term = 1.0;
  const double x2 = x * 0.5;
  for (int k = 1; k < 64; ++k) {
    term *= (x2 / k) * (x2 / k);
    sum += term;
    if (term < 1e-18 * sum) break;
  }
  return sum;
}

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

}  // namespace

Waveform upsample(const Waveform& w, int target_rate) {
  if (w.samples.empty()) throw std::runtime_error("upsample: empty waveform");
  if (w.sample_rate <= 0 || target_rate <= 0)
    throw std::runtime_error("upsample: rates must be positive");
  if (target_rate < w.sample_rate)
    throw std::runtime_error("upsample: downsampling not supported (" +
                             std::to_string(w.sample_rate) + " -> " +
                             std::to_string(target_rate) + " Hz)");
  if (target_rate == w.sample_rate) return w;

  const int g = std::gcd(target_rate, w.sample_rate);
  const long L = target_rate / g;   // interpolation factor
  const long M = w.sample_rate / g; // decimation factor, M < L

  constexpr long kTapsPerPhase = 64;
  constexpr double kKaiserBeta = 8.6;
  const long proto_len = kTapsPerPhase * L;
  const double center = double(proto_len - 1) / 2.0;
  const double cutoff = 0.5 / double(L);  // cycles per intermediate sample
  const double inv_i0b = 1.0 / bessel_i0(kKaiserBeta);

  // phase r holds prototype taps h[r + k*L], normalized to unit DC gain
  std::vector<std::vector<double>> phases(static_cast<std::size_t>(L));
  for (long r = 0; r < L; ++r) {
    auto& ph = phases[std::size_t(r)];
    ph.resize(std::size_t(kTapsPerPhase));
    double sum = 0.0;
    for (long k = 0; k < kTapsPerPhase; ++k) {
      const long n = r + k * L;
      const double t = (double(n) - center) / center;  // [-1, 1]
      const double win = bessel_i0(kKaiserBeta * std::sqrt(std::max(0.0, 1.0 - t * t))) * inv_i0b;
      ph[std::size_t(k)] = 2.0 * cutoff * sinc(2.0 * cutoff * (double(n) - center)) * win;
      sum += ph[std::size_t(k)];
    }
    for (double& v : ph) v /= sum;
  }

  const long n_in = long(w.samples.size());
  const long n_out = (n_in * L + M - 1) / M;
  const long delay = 32 * L - 1;  // (proto_len-1)/2 rounded down

  Waveform out;
  out.sample_rate = target_rate;
  out.source_id = w.source_id;
  out.start_time = w.start_time;
  out.samples.resize(std::size_t(n_out));
  const double* x = w.samples.data();
  for (long i = 0; i < n_out; ++i) {
    const long t = i * M + delay;
    const long j0 = t / L;
    const auto& ph = phases[std::size_t(t - j0 * L)];
    double acc = 0.0;
    // y[i] = sum_k ph[k] * x[j0 - k], zero outside the signal
    long k_lo = std::max(0L, j0 - (n_in - 1));
    long k_hi = std::min(kTapsPerPhase - 1, j0);
    for (long k = k_lo; k <= k_hi; ++k)
      acc += ph[std::size_t(k)] * x[j0 - k];
    out.samples[std::size_t(i)] = acc;
  }
  return out;
}

Waveform normalize(const Waveform& w) {
  if (w.samples.empty()) throw std::runtime_error("normalize: empty waveform");
  double peak = 0.0;
  for (double s : w.samples) peak = std::max(peak, std::abs(s));
  if (peak == 0.0)
    throw std::runtime_error("normalize: all-zero waveform");
  Waveform out = w;
  for (double& s : out.samples) s /= peak;
  return out;
}

std::string_view to_string(Label l) {
  return l == Label::earthquake ? "earthquake" : "non_earthquake";
}

std::string_view to_string(Split s) {
  return s == Split::train ? "train" : "test";
}

Label label_from_string(std::string_view s) {
  if (s == "earthquake") return Label::earthquake;
  if (s == "non_earthquake") return Label::non_earthquake;
  throw std::runtime_error("manifest: unknown label '" + std::string(s) + "'");
}

Split split_from_string(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  throw std::runtime_error("manifest: unknown split '" + std::string(s) + "'");
}

std::vector<DatasetEntry> read_manifest(std::string_view text) {
  std::vector<DatasetEntry> entries;
  std::size_t pos = 0, line_no = 0;
  bool header_seen = false;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    std::string_view line = text.substr(
        pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
    ++line_no;
    pos = eol == std::string_view::npos ? text.size() : eol + 1;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' '))
      line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;
    if (!header_seen) {
      if (line != "path,label,split")
        throw std::runtime_error("manifest: expected header path,label,split");
      header_seen = true;
      continue;
    }
    std::size_t c1 = line.find(',');
    std::size_t c2 = c1 == std::string_view::npos ? c1 : line.find(',', c1 + 1);
    if (c1 == std::string_view::npos || c2 == std::string_view::npos)
      throw std::runtime_error("manifest: malformed row at line " +
                               std::to_string(line_no));
    DatasetEntry e;
    e.path = std::string(line.substr(0, c1));
    e.label = label_from_string(line.substr(c1 + 1, c2 - c1 - 1));
    e.split = split_from_string(line.substr(c2 + 1));
    entries.push_back(std::move(e));
  }
  for (std::size_t i = 0; i < entries.size(); ++i)
    for (std::size_t j = i + 1; j < entries.size(); ++j)
      if (entries[i].path == entries[j].path)
        throw std::runtime_error("manifest: duplicate path " + entries[i].path);
  return entries;
}

std::string write_manifest(std::span<const DatasetEntry> entries) {
  std::ostringstream os;
  os << "path,label,split\n";
  for (const auto& e : entries)
    os << e.path << ',' << to_string(e.label) << ',' << to_string(e.split)
       << "\n";
  return os.str();
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(text.data(), std::streamsize(text.size()));
  if (!out) throw std::runtime_error("write failed for " + path);
}

std::vector<std::uint8_t> read_binary_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

void write_binary_file(const std::string& path,
                       std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            std::streamsize(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path);
}

Waveform read_wav_file(const std::string& path) {
  auto w = read_wav(read_binary_file(path));
  w.source_id = path;
  return w;
}

void write_wav_file(const std::string& path, const Waveform& w) {
  write_binary_file(path, write_wav(w));
}

}  // namespace quake
