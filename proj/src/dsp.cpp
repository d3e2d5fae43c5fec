#include "quake/dsp.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "quake/kernels.hpp"

namespace quake {

int FeatureConfig::frame_len() const {
  return int(std::llround(frame_len_ms * sample_rate / 1000.0));
}

int FeatureConfig::stride() const {
  return int(std::llround(stride_ms * sample_rate / 1000.0));
}

FeatureConfig FeatureConfig::reference(int rate) {
  FeatureConfig c;
  c.stride_ms = 20.0;
  c.sample_rate = rate;
  return c;
}

void FeatureConfig::validate() const {
  if (sample_rate <= 0) throw std::runtime_error("feature config: sample_rate not set");
  if (alpha < 0.0 || alpha >= 1.0)
    throw std::runtime_error("feature config: alpha must be in [0, 1)");
  if (n_ceps <= 0 || n_ceps > n_filters)
    throw std::runtime_error("feature config: need 0 < n_ceps <= n_filters");
  if (stride_ms <= 0.0) throw std::runtime_error("feature config: stride_ms must be positive");
  if (frame_len() < 2) throw std::runtime_error("feature config: frame too short");
  if (stride() < 1) throw std::runtime_error("feature config: stride below one sample");
  if (nfft < frame_len())
    throw std::runtime_error("feature config: nfft smaller than frame length");
  if (!std::has_single_bit(unsigned(nfft)))
    throw std::runtime_error("feature config: nfft must be a power of two");
  if (log_floor <= 0.0) throw std::runtime_error("feature config: log_floor must be positive");
}

std::string_view to_string(FeatureKind k) {
  return k == FeatureKind::mfcc ? "mfcc" : "log_filterbank";
}

FeatureKind feature_kind_from_string(std::string_view s) {
  if (s == "mfcc") return FeatureKind::mfcc;
  if (s == "log_filterbank") return FeatureKind::log_filterbank;
  throw std::runtime_error("unknown feature kind '" + std::string(s) + "'");
}

std::vector<double> pre_emphasis(std::span<const double> signal, double alpha) {
  if (signal.empty()) throw std::runtime_error("pre_emphasis: empty signal");
  std::vector<double> y(signal.size());
  y[0] = signal[0];
  for (std::size_t t = 1; t < signal.size(); ++t)
    y[t] = signal[t] - alpha * signal[t - 1];
  return y;
}

std::vector<double> hamming_window(int n) {
  if (n < 2) throw std::runtime_error("hamming_window: need N >= 2");
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    w[std::size_t(i)] =
        0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / (n - 1));
  return w;
}

FrameMatrix frame_signal(std::span<const double> signal,
                         const FeatureConfig& config) {
  config.validate();
  const std::size_t len = std::size_t(config.frame_len());
  const std::size_t stride = std::size_t(config.stride());
  if (signal.size() < len)
    throw std::runtime_error("frame_signal: signal shorter than one frame");

  FrameMatrix fm;
  fm.frame_len = len;
  fm.n_frames = 1 + (signal.size() - len) / stride;
  fm.data.resize(fm.n_frames * len);
  fm.frame_times.resize(fm.n_frames);
  const auto window = hamming_window(int(len));
  for (std::size_t i = 0; i < fm.n_frames; ++i) {
    const double* src = signal.data() + i * stride;
    double* dst = fm.row(i);
    for (std::size_t j = 0; j < len; ++j) dst[j] = src[j] * window[j];
    fm.frame_times[i] = double(i * stride) / config.sample_rate;
  }
  return fm;
}

void fft_inplace(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  if (!std::has_single_bit(n)) throw std::runtime_error("fft: size not a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * std::numbers::pi / double(len);
    const std::complex<double> wstep(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        std::complex<double> u = a[i + k];
        std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wstep;
      }
    }
  }
}

Mat power_spectrum(const FrameMatrix& frames, int nfft) {
  if (nfft < int(frames.frame_len))
    throw std::runtime_error("power_spectrum: nfft smaller than frame length");
  if (!std::has_single_bit(unsigned(nfft)))
    throw std::runtime_error("power_spectrum: nfft must be a power of two");

  const std::size_t n_bins = std::size_t(nfft) / 2 + 1;
  Mat p(frames.n_frames, n_bins);
  std::vector<std::complex<double>> buf(static_cast<std::size_t>(nfft));
  for (std::size_t i = 0; i < frames.n_frames; ++i) {
    std::fill(buf.begin(), buf.end(), std::complex<double>(0.0, 0.0));
    const double* f = frames.row(i);
    for (std::size_t j = 0; j < frames.frame_len; ++j) buf[j] = f[j];
    fft_inplace(buf);
    for (std::size_t k = 0; k < n_bins; ++k)
      p.at(i, k) = std::norm(buf[k]) / double(nfft);
  }
  return p;
}

double hz_to_mel(double f) {
  if (f < 0.0) throw std::runtime_error("hz_to_mel: negative frequency");
  return 1125.0 * std::log(1.0 + f / 700.0);
}

double mel_to_hz(double m) {
  if (m < 0.0) throw std::runtime_error("mel_to_hz: negative mel value");
  return 700.0 * (std::exp(m / 1125.0) - 1.0);
}

FilterBank build_filterbank(const FeatureConfig& config) {
  config.validate();
  if (config.n_filters < 1)
    throw std::runtime_error("filterbank: need at least one filter");

  const int n = config.n_filters;
  const double nyquist = config.sample_rate / 2.0;
  const double mel_hi = hz_to_mel(nyquist);

  FilterBank fb;
  fb.n_filters = n;
  fb.n_bins = config.nfft / 2 + 1;
  fb.edge_freqs.resize(std::size_t(n) + 2);
  fb.edge_bins.resize(std::size_t(n) + 2);
  for (int i = 0; i < n + 2; ++i) {
    const double mel = mel_hi * double(i) / double(n + 1);
    const double hz = mel_to_hz(mel);
    fb.edge_freqs[std::size_t(i)] = hz;
    fb.edge_bins[std::size_t(i)] =
        int((config.nfft + 1) * hz / config.sample_rate);
  }
  for (int i = 0; i + 1 < n + 2; ++i) {
    if (fb.edge_bins[std::size_t(i)] >= fb.edge_bins[std::size_t(i) + 1]) {
      // the mel grid is finer than the FFT grid; say what would fix it
      const double mel_step = mel_hi / double(n + 1);
      const double min_hz_step =
          mel_to_hz(mel_step);  // narrowest mel band, at the low end
      const int needed_nfft = int(std::ceil(config.sample_rate / min_hz_step));
      throw std::runtime_error(
          "filterbank: adjacent filter edges collapse onto one FFT bin; "
          "increase nfft to >= " + std::to_string(std::bit_ceil(unsigned(needed_nfft))) +
          ", reduce n_filters, or raise the sample rate");
    }
  }

  fb.weights = Mat(std::size_t(n), std::size_t(fb.n_bins));
  for (int j = 0; j < n; ++j) {
    const int b0 = fb.edge_bins[std::size_t(j)];
    const int b1 = fb.edge_bins[std::size_t(j) + 1];
    const int b2 = fb.edge_bins[std::size_t(j) + 2];
    for (int k = b0; k <= b1; ++k)
      fb.weights.at(std::size_t(j), std::size_t(k)) =
          double(k - b0) / double(b1 - b0);
    for (int k = b1; k <= std::min(b2, fb.n_bins - 1); ++k)
      fb.weights.at(std::size_t(j), std::size_t(k)) =
          double(b2 - k) / double(b2 - b1);
  }
  return fb;
}

Mat apply_filterbank(const Mat& power, const FilterBank& fb, double log_floor) {
  if (power.cols != std::size_t(fb.n_bins))
    throw std::runtime_error("apply_filterbank: bin count mismatch");
  Mat e(power.rows, std::size_t(fb.n_filters));
  for (std::size_t i = 0; i < power.rows; ++i)
    for (std::size_t j = 0; j < std::size_t(fb.n_filters); ++j)
      e.at(i, j) = std::log(std::max(
          kern::dot(fb.weights.row(j), power.row(i), power.cols), log_floor));
  return e;
}

std::vector<double> dct2_truncated(std::span<const double> x, int n_ceps) {
  const int n = int(x.size());
  if (n_ceps > n)
    throw std::runtime_error("dct2: more coefficients requested than inputs");
  std::vector<double> out(static_cast<std::size_t>(n_ceps));
  const double s0 = std::sqrt(1.0 / n);
  const double sk = std::sqrt(2.0 / n);
  for (int k = 0; k < n_ceps; ++k) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i)
      acc += x[std::size_t(i)] *
             std::cos(std::numbers::pi * k * (2.0 * i + 1.0) / (2.0 * n));
    out[std::size_t(k)] = (k == 0 ? s0 : sk) * acc;
  }
  return out;
}

FeatureMatrix extract_features(const Waveform& w, const FeatureConfig& config,
                               FeatureKind kind) {
  config.validate();
  if (w.sample_rate != config.sample_rate)
    throw std::runtime_error("extract_features: waveform rate " +
                             std::to_string(w.sample_rate) +
                             " != config rate " +
                             std::to_string(config.sample_rate));
  const auto emphasized = pre_emphasis(w.samples, config.alpha);
  const auto frames = frame_signal(emphasized, config);
  const auto power = power_spectrum(frames, config.nfft);
  const auto fb = build_filterbank(config);
  Mat energies = apply_filterbank(power, fb, config.log_floor);

  FeatureMatrix out;
  out.kind = kind;
  if (kind == FeatureKind::log_filterbank) {
    out.values = std::move(energies);
    return out;
  }
  out.values = Mat(energies.rows, std::size_t(config.n_ceps));
  for (std::size_t i = 0; i < energies.rows; ++i) {
    const auto ceps = dct2_truncated(
        std::span<const double>(energies.row(i), energies.cols), config.n_ceps);
    std::copy(ceps.begin(), ceps.end(), out.values.row(i));
  }
  return out;
}

std::string feature_csv(const FeatureMatrix& f, const FeatureConfig& config) {
  std::ostringstream os;
  os.precision(17);
  os << "# alpha=" << config.alpha << "\n";
  os << "# frame_len_ms=" << config.frame_len_ms << "\n";
  os << "# stride_ms=" << config.stride_ms << "\n";
  os << "# nfft=" << config.nfft << "\n";
  os << "# n_filters=" << config.n_filters << "\n";
  os << "# n_ceps=" << config.n_ceps << "\n";
  os << "# sample_rate=" << config.sample_rate << "\n";
  os << "# log_floor=" << config.log_floor << "\n";
  os << "# kind=" << to_string(f.kind) << "\n";
  for (std::size_t c = 0; c < f.values.cols; ++c)
    os << (c ? "," : "") << 'c' << c;
  os << "\n";
  for (std::size_t r = 0; r < f.values.rows; ++r) {
    for (std::size_t c = 0; c < f.values.cols; ++c)
      os << (c ? "," : "") << f.values.at(r, c);
    os << "\n";
  }
  return os.str();
}

FeatureMatrix parse_feature_csv(std::string_view text,
                                FeatureConfig* config_out) {
  FeatureMatrix out;
  FeatureConfig cfg;
  std::vector<double> vals;
  std::size_t cols = 0;
  std::size_t pos = 0, line_no = 0;
  bool header_seen = false;

  auto set_kv = [&](std::string_view key, std::string_view val) {
    auto num = [&](double& d) {
      auto [p, ec] = std::from_chars(val.data(), val.data() + val.size(), d);
      (void)p;
      if (ec != std::errc{})
        throw std::runtime_error("feature csv: bad value for " + std::string(key));
    };
    double d = 0;
    if (key == "alpha") { num(d); cfg.alpha = d; }
    else if (key == "frame_len_ms") { num(d); cfg.frame_len_ms = d; }
    else if (key == "stride_ms") { num(d); cfg.stride_ms = d; }
    else if (key == "nfft") { num(d); cfg.nfft = int(d); }
    else if (key == "n_filters") { num(d); cfg.n_filters = int(d); }
    else if (key == "n_ceps") { num(d); cfg.n_ceps = int(d); }
    else if (key == "sample_rate") { num(d); cfg.sample_rate = int(d); }
    else if (key == "log_floor") { num(d); cfg.log_floor = d; }
    else if (key == "kind") out.kind = feature_kind_from_string(val);
  };

  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    std::string_view line = text.substr(
        pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
    ++line_no;
    pos = eol == std::string_view::npos ? text.size() : eol + 1;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' '))
      line.remove_suffix(1);
    if (line.empty()) continue;
    if (line.front() == '#') {
      std::string_view body = line.substr(1);
      while (!body.empty() && body.front() == ' ') body.remove_prefix(1);
      std::size_t eq = body.find('=');
      if (eq != std::string_view::npos)
        set_kv(body.substr(0, eq), body.substr(eq + 1));
      continue;
    }
    if (!header_seen) {
      header_seen = true;  // "c0,c1,..." column names
      cols = std::size_t(std::count(line.begin(), line.end(), ',')) + 1;
      continue;
    }
    std::size_t start = 0, n_in_row = 0;
    while (start <= line.size()) {
      std::size_t comma = line.find(',', start);
      std::string_view cell = line.substr(
          start, comma == std::string_view::npos ? line.size() - start
                                                 : comma - start);
      double v = 0;
      auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc{} || p != cell.data() + cell.size())
        throw std::runtime_error("feature csv: bad number at line " +
                                 std::to_string(line_no));
      vals.push_back(v);
      ++n_in_row;
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (n_in_row != cols)
      throw std::runtime_error("feature csv: ragged row at line " +
                               std::to_string(line_no));
  }
  if (cols == 0) throw std::runtime_error("feature csv: missing header");
  out.values.rows = vals.size() / cols;
  out.values.cols = cols;
  out.values.v = std::move(vals);
  if (config_out) *config_out = cfg;
  return out;
}

}  // namespace quake
