#pragma once

#include <complex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "quake/mat.hpp"
#include "quake/waveform.hpp"

namespace quake {

// Short-time analysis parameters for the filterbank / cepstral feature chain.
struct FeatureConfig {
  double alpha = 0.95;        // pre-emphasis coefficient
  double frame_len_ms = 25.0;
  double stride_ms = 10.0;    // 20 ms reproduces the 9-frame reference shape
  int nfft = 256;
  int n_filters = 26;
  int n_ceps = 13;
  int sample_rate = 0;
  double log_floor = 1e-12;

  int frame_len() const;  // samples
  int stride() const;     // samples

  // 25 ms frames / 20 ms stride / 26 filters / 13 coefficients at `rate`;
  // a 0.2 s window then yields a 9 x 13 feature matrix.
  static FeatureConfig reference(int rate);

  void validate() const;
  bool operator==(const FeatureConfig&) const = default;
};

enum class FeatureKind { mfcc, log_filterbank };
std::string_view to_string(FeatureKind k);
FeatureKind feature_kind_from_string(std::string_view s);

struct FrameMatrix {
  std::size_t n_frames = 0;
  std::size_t frame_len = 0;
  std::vector<double> data;         // n_frames x frame_len, windowed
  std::vector<double> frame_times;  // start time of each frame, seconds

  double* row(std::size_t i) { return data.data() + i * frame_len; }
  const double* row(std::size_t i) const { return data.data() + i * frame_len; }
};

struct FilterBank {
  int n_filters = 0;
  int n_bins = 0;                  // nfft/2 + 1
  Mat weights;                     // n_filters x n_bins, triangular rows
  std::vector<double> edge_freqs;  // n_filters + 2 Hz values, mel-spaced
  std::vector<int> edge_bins;      // snapped FFT bin indices
};

struct FeatureMatrix {
  Mat values;  // n_frames x n_ceps (mfcc) or n_frames x n_filters (log fbank)
  FeatureKind kind = FeatureKind::mfcc;
};

// y(0) = x(0); y(t) = x(t) - alpha*x(t-1)
std::vector<double> pre_emphasis(std::span<const double> signal, double alpha);

// w[n] = 0.54 - 0.46 cos(2 pi n / (N-1)), palindromic
std::vector<double> hamming_window(int n);

// Full frames only (floor rule), each frame Hamming-windowed.
FrameMatrix frame_signal(std::span<const double> signal,
                         const FeatureConfig& config);

// P[k] = |DFT_k|^2 / nfft for k = 0..nfft/2; frames zero-padded to nfft.
Mat power_spectrum(const FrameMatrix& frames, int nfft);

double hz_to_mel(double f);
double mel_to_hz(double m);

// Triangular filters on mel-spaced edges snapped to FFT bins.
FilterBank build_filterbank(const FeatureConfig& config);

// E[i][j] = ln(max(sum_k fb[j][k]*power[i][k], log_floor))
Mat apply_filterbank(const Mat& power, const FilterBank& fb, double log_floor);

// Orthonormal DCT-II, first n_ceps coefficients.
std::vector<double> dct2_truncated(std::span<const double> x, int n_ceps);

// pre-emphasis -> framing -> power spectrum -> filterbank (-> DCT for mfcc)
FeatureMatrix extract_features(const Waveform& w, const FeatureConfig& config,
                               FeatureKind kind);

// in-place radix-2 FFT, size must be a power of two
void fft_inplace(std::vector<std::complex<double>>& a);

// CSV dump: '#'-prefixed key=value config echo, "c0,..,cN" header, one frame
// per row.
std::string feature_csv(const FeatureMatrix& f, const FeatureConfig& config);
FeatureMatrix parse_feature_csv(std::string_view text,
                                FeatureConfig* config_out = nullptr);

}  // namespace quake
