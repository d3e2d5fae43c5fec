#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace quake {

// Uniformly sampled amplitude series, full scale +-1.0.
struct Waveform {
  std::vector<double> samples;
  int sample_rate = 0;
  std::string source_id;
  std::optional<double> start_time;  // seconds since epoch

  std::size_t size() const { return samples.size(); }
  double duration_s() const {
    return sample_rate > 0 ? double(samples.size()) / sample_rate : 0.0;
  }
};

// Clip to [-1,1], scale by 32768, round half away from zero, saturate.
std::int16_t quantize16(double x);

// RIFF/WAVE, PCM 16-bit mono only. Samples scaled to [-1,1] by /32768.
Waveform read_wav(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> write_wav(const Waveform& w);

Waveform read_wav_file(const std::string& path);
void write_wav_file(const std::string& path, const Waveform& w);

// One amplitude per line; '#' comment lines; rate from "# rate=<Hz>" header
// or the rate_hint argument (header wins).
Waveform read_csv(std::string_view text, int rate_hint = 0);
std::string write_csv(const Waveform& w);

// Rational polyphase interpolation, windowed-sinc prototype (Kaiser beta 8.6,
// 64 taps per phase). target_rate == sample_rate is the identity.
Waveform upsample(const Waveform& w, int target_rate);

// Peak normalization: max |sample| becomes exactly 1.0.
Waveform normalize(const Waveform& w);

// ---- dataset manifest ----

enum class Label { earthquake, non_earthquake };
enum class Split { train, test };

struct DatasetEntry {
  std::string path;
  Label label = Label::non_earthquake;
  Split split = Split::train;

  bool operator==(const DatasetEntry&) const = default;
};

std::string_view to_string(Label l);
std::string_view to_string(Split s);
Label label_from_string(std::string_view s);
Split split_from_string(std::string_view s);

// CSV with header path,label,split
std::vector<DatasetEntry> read_manifest(std::string_view text);
std::string write_manifest(std::span<const DatasetEntry> entries);

// file helpers
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view text);
std::vector<std::uint8_t> read_binary_file(const std::string& path);
void write_binary_file(const std::string& path,
                       std::span<const std::uint8_t> bytes);

}  // namespace quake
