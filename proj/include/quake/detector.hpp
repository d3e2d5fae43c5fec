#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "quake/model_io.hpp"
#include "quake/packet.hpp"
#include "quake/waveform.hpp"

namespace quake {

struct DetectorConfig {
  double window_s = 0.0;      // 0 -> use the model's training window
  double min_buffer_s = 1.28; // warm-up before the first evaluation
  double alarm_threshold = 0.5;
  // Optional sliding evaluation; default is one evaluation per full
  // non-overlapping window.
  bool sliding = false;
  double stride_s = 0.0;
};

struct AlarmEvent {
  Label label = Label::earthquake;
  double probability = 0.0;
  std::uint64_t trigger_sample_index = 0;  // last sample of the window
  double gather_ms = 0.0;
  double process_ms = 0.0;
  double predict_ms = 0.0;
  double total_ms = 0.0;  // always gather + process + predict
};

// Fixed-capacity ring holding the most recent samples. The producer is never
// blocked; oldest samples are evicted first.
class StreamBuffer {
 public:
  StreamBuffer(int sample_rate, std::size_t capacity);

  void push(std::span<const double> samples);
  std::size_t size() const { return count_; }
  std::size_t capacity() const { return data_.size(); }
  std::uint64_t total_consumed() const { return total_; }
  int sample_rate() const { return sample_rate_; }

  // newest n samples in time order; n <= size()
  void copy_last(std::size_t n, double* out) const;

 private:
  std::vector<double> data_;
  std::size_t head_ = 0;  // next write position
  std::size_t count_ = 0;
  std::uint64_t total_ = 0;
  int sample_rate_ = 0;
};

// Streams samples through the feature chain and a trained model; emits an
// alarm for each evaluated window classified as an earthquake at or above
// the alarm threshold.
class Detector {
 public:
  Detector(ModelFile model, DetectorConfig config);

  std::vector<AlarmEvent> push_samples(std::span<const double> samples);
  std::vector<AlarmEvent> push_packet(const TelemetryPacket& packet);

  int sample_rate() const { return model_.feat_config.sample_rate; }
  std::uint64_t window_samples() const { return window_; }
  std::uint64_t warmup_samples() const { return warmup_; }
  std::uint64_t evaluations() const { return evaluations_; }
  std::uint64_t skipped_silent() const { return skipped_silent_; }
  const ModelFile& model() const { return model_; }

  // Sample counts at which a detector with this window/warm-up evaluates a
  // stream of length n; the batch side of stream/batch equivalence.
  static std::vector<std::uint64_t> evaluation_points(std::uint64_t n,
                                                      std::uint64_t window,
                                                      std::uint64_t warmup,
                                                      std::uint64_t stride);

  // Classify one window the same way the streaming path does; nullopt for an
  // all-zero window (nothing to normalize).
  std::optional<nn::Prediction> classify_window(
      std::span<const double> window) const;

 private:
  std::optional<AlarmEvent> evaluate();

  ModelFile model_;
  nn::Model net_;
  DetectorConfig config_;
  StreamBuffer buffer_;
  std::uint64_t window_ = 0;
  std::uint64_t warmup_ = 0;
  std::uint64_t stride_ = 0;
  std::uint64_t next_eval_ = 0;
  std::uint64_t evaluations_ = 0;
  std::uint64_t skipped_silent_ = 0;
  // arrival timestamps of upcoming window-start samples, keyed by index
  std::deque<std::pair<std::uint64_t, std::chrono::steady_clock::time_point>>
      impl_stamps_;
  std::uint64_t next_start_to_stamp_ = 0;
};

// ---- replay (software stand-in for the sensor rig) ----

struct ReplayStats {
  std::uint64_t packets = 0;
  std::uint64_t samples = 0;
  double elapsed_s = 0.0;
};

using PacketSink = std::function<void(std::span<const std::uint8_t>)>;

// Emits <=256-sample packets paced so that stream time ~= waveform time /
// speed. speed = infinity emits as fast as possible (offline mode).
ReplayStats replay_source(const Waveform& w, double speed,
                          const PacketSink& sink,
                          std::size_t samples_per_packet = kMaxSamplesPerPacket);

// ---- receive side ----

struct ReceiveStats {
  std::uint64_t packets_ok = 0;
  std::uint64_t dropped_old = 0;  // duplicate or out-of-order seq
  std::uint64_t gap_samples_est = 0;
  std::uint64_t gaps = 0;
  std::uint64_t crc_failures = 0;
  std::uint64_t samples = 0;
  std::uint64_t alarms = 0;
};

// Pull source; empty optional means end of stream.
using PacketSource = std::function<std::optional<std::vector<std::uint8_t>>()>;
using AlarmSink = std::function<void(const AlarmEvent&)>;

// Drops duplicate/out-of-order packets, counts gaps, feeds samples to the
// detector in seq order. Raises after max_decode_failures bad packets.
ReceiveStats receive_loop(const PacketSource& source, Detector& detector,
                          const AlarmSink& on_alarm,
                          int max_decode_failures = 25);

// "<iso8601 timestamp> label=.. probability=.. gather_ms=.. process_ms=..
//  predict_ms=.. total_ms=.."
std::string alarm_log_line(const AlarmEvent& event);

}  // namespace quake
