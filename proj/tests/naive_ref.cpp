#include "naive_ref.hpp"

#include <algorithm>
#include <cmath>

namespace naive {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

std::vector<double> pre_emphasis(const std::vector<double>& x, double alpha) {
  std::vector<double> y(x.size());
  for (std::size_t t = 0; t < x.size(); ++t)
    y[t] = t == 0 ? x[0] : x[t] - alpha * x[t - 1];
  return y;
}

std::vector<double> hamming(int n) {
  std::vector<double> w(std::size_t(n), 0.0);
  for (int i = 0; i < n; ++i)
    w[std::size_t(i)] = 0.54 - 0.46 * std::cos(2.0 * kPi * i / (n - 1));
  return w;
}

Matrix frames(const std::vector<double>& x, int frame_len, int stride) {
  const auto window = hamming(frame_len);
  const std::size_t l = std::size_t(frame_len), s = std::size_t(stride);
  const std::size_t m = x.size() >= l ? 1 + (x.size() - l) / s : 0;
  Matrix out(m, l);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < l; ++j)
      out.at(i, j) = x[i * s + j] * window[j];
  return out;
}

Matrix dft_power(const Matrix& fr, int nfft) {
  const std::size_t bins = std::size_t(nfft) / 2 + 1;
  Matrix p(fr.rows, bins);
  for (std::size_t i = 0; i < fr.rows; ++i) {
    for (std::size_t k = 0; k < bins; ++k) {
      double re = 0.0, im = 0.0;
      for (std::size_t n = 0; n < fr.cols; ++n) {
        const double ang = -2.0 * kPi * double(k) * double(n) / double(nfft);
        re += fr.at(i, n) * std::cos(ang);
        im += fr.at(i, n) * std::sin(ang);
      }
      p.at(i, k) = (re * re + im * im) / double(nfft);
    }
  }
  return p;
}

double hz_to_mel(double f) { return 1125.0 * std::log(1.0 + f / 700.0); }

double mel_to_hz(double m) { return 700.0 * (std::exp(m / 1125.0) - 1.0); }

Matrix filterbank(int n_filters, int nfft, int sample_rate) {
  const double mel_max = hz_to_mel(sample_rate / 2.0);
  std::vector<int> bins(std::size_t(n_filters) + 2, 0);
  for (int i = 0; i < n_filters + 2; ++i) {
    const double mel = mel_max * double(i) / double(n_filters + 1);
    const double hz = mel_to_hz(mel);
    bins[std::size_t(i)] = int(std::floor((nfft + 1) * hz / sample_rate));
  }
  Matrix fb(std::size_t(n_filters), std::size_t(nfft) / 2 + 1);
  for (int j = 0; j < n_filters; ++j) {
    const int b0 = bins[std::size_t(j)], b1 = bins[std::size_t(j) + 1],
              b2 = bins[std::size_t(j) + 2];
    for (int k = b0 + 1; k < b1; ++k)
      fb.at(std::size_t(j), std::size_t(k)) = double(k - b0) / double(b1 - b0);
    fb.at(std::size_t(j), std::size_t(b1)) = 1.0;
    for (int k = b1 + 1; k < b2; ++k)
      fb.at(std::size_t(j), std::size_t(k)) = double(b2 - k) / double(b2 - b1);
  }
  return fb;
}

Matrix log_energies(const Matrix& power, const Matrix& fb, double log_floor) {
  Matrix e(power.rows, fb.rows);
  for (std::size_t i = 0; i < power.rows; ++i) {
    for (std::size_t j = 0; j < fb.rows; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < power.cols; ++k)
        acc += fb.at(j, k) * power.at(i, k);
      e.at(i, j) = std::log(std::max(acc, log_floor));
    }
  }
  return e;
}

std::vector<double> dct2_ortho(const std::vector<double>& x, int n_keep) {
  const int n = int(x.size());
  std::vector<double> out(std::size_t(n_keep), 0.0);
  for (int k = 0; k < n_keep; ++k) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i)
      acc += x[std::size_t(i)] * std::cos(kPi * k * (2.0 * i + 1.0) / (2.0 * n));
    const double scale = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
    out[std::size_t(k)] = scale * acc;
  }
  return out;
}

Matrix mfcc(const std::vector<double>& signal, int sample_rate, double alpha,
            double frame_ms, double stride_ms, int nfft, int n_filters,
            int n_ceps, double log_floor) {
  const int frame_len = int(std::llround(frame_ms * sample_rate / 1000.0));
  const int stride = int(std::llround(stride_ms * sample_rate / 1000.0));
  const auto emphasized = pre_emphasis(signal, alpha);
  const auto fr = frames(emphasized, frame_len, stride);
  const auto power = dft_power(fr, nfft);
  const auto fb = filterbank(n_filters, nfft, sample_rate);
  const auto energies = log_energies(power, fb, log_floor);
  Matrix out(energies.rows, std::size_t(n_ceps));
  for (std::size_t i = 0; i < energies.rows; ++i) {
    std::vector<double> row(energies.v.begin() + long(i * energies.cols),
                            energies.v.begin() + long((i + 1) * energies.cols));
    const auto ceps = dct2_ortho(row, n_ceps);
    for (std::size_t k = 0; k < ceps.size(); ++k) out.at(i, k) = ceps[k];
  }
  return out;
}

std::vector<double> conv2d(const std::vector<double>& in, std::size_t h,
                           std::size_t wd, std::size_t c,
                           const std::vector<double>& w,
                           const std::vector<double>& b, std::size_t f) {
  std::vector<double> out(h * wd * f, 0.0);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < wd; ++x)
      for (std::size_t fo = 0; fo < f; ++fo) {
        double acc = b[fo];
        for (std::size_t dy = 0; dy < 3; ++dy)
          for (std::size_t dx = 0; dx < 3; ++dx)
            for (std::size_t ch = 0; ch < c; ++ch) {
              const long iy = long(y) + long(dy) - 1;
              const long ix = long(x) + long(dx) - 1;
              if (iy < 0 || iy >= long(h) || ix < 0 || ix >= long(wd)) continue;
              acc += in[(std::size_t(iy) * wd + std::size_t(ix)) * c + ch] *
                     w[((dy * 3 + dx) * c + ch) * f + fo];
            }
        out[(y * wd + x) * f + fo] = acc;
      }
  return out;
}

std::vector<double> maxpool2x2(const std::vector<double>& in, std::size_t h,
                               std::size_t wd, std::size_t c) {
  const std::size_t oh = h / 2, ow = wd / 2;
  std::vector<double> out(oh * ow * c, 0.0);
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x)
      for (std::size_t ch = 0; ch < c; ++ch) {
        double best = in[(2 * y * wd + 2 * x) * c + ch];
        best = std::max(best, in[(2 * y * wd + 2 * x + 1) * c + ch]);
        best = std::max(best, in[((2 * y + 1) * wd + 2 * x) * c + ch]);
        best = std::max(best, in[((2 * y + 1) * wd + 2 * x + 1) * c + ch]);
        out[(y * ow + x) * c + ch] = best;
      }
  return out;
}

namespace {
double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }
}  // namespace

void lstm_cell(const std::vector<double>& x, const std::vector<double>& h_prev,
               const std::vector<double>& c_prev, const std::vector<double>& wx,
               const std::vector<double>& wh, const std::vector<double>& b,
               std::size_t hidden, std::vector<double>& h_out,
               std::vector<double>& c_out) {
  const std::size_t d = x.size();
  std::vector<double> z(4 * hidden, 0.0);
  for (std::size_t r = 0; r < 4 * hidden; ++r) {
    double acc = b[r];
    for (std::size_t j = 0; j < d; ++j) acc += wx[r * d + j] * x[j];
    for (std::size_t j = 0; j < hidden; ++j) acc += wh[r * hidden + j] * h_prev[j];
    z[r] = acc;
  }
  h_out.assign(hidden, 0.0);
  c_out.assign(hidden, 0.0);
  for (std::size_t j = 0; j < hidden; ++j) {
    const double gi = sigmoid(z[j]);
    const double gf = sigmoid(z[hidden + j]);
    const double gg = std::tanh(z[2 * hidden + j]);
    const double go = sigmoid(z[3 * hidden + j]);
    c_out[j] = gf * c_prev[j] + gi * gg;
    h_out[j] = go * std::tanh(c_out[j]);
  }
}

std::vector<double> sta_lta(const std::vector<double>& x, std::size_t ns,
                            std::size_t nl) {
  std::vector<double> ratio(x.size(), 0.0);
  for (std::size_t i = nl - 1; i < x.size(); ++i) {
    double sta = 0.0, lta = 0.0;
    for (std::size_t k = i + 1 - ns; k <= i; ++k) sta += x[k] * x[k];
    for (std::size_t k = i + 1 - nl; k <= i; ++k) lta += x[k] * x[k];
    sta /= double(ns);
    lta /= double(nl);
    ratio[i] = sta / std::max(lta, 1e-15);
  }
  return ratio;
}

}  // namespace naive
