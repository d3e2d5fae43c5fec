#include "quake/detector.hpp"

#include <cmath>
#include <cstdio>
#include <ctime>
#include <deque>
#include <stdexcept>
#include <thread>

#include "quake/dsp.hpp"

namespace quake {

StreamBuffer::StreamBuffer(int sample_rate, std::size_t capacity)
    : data_(capacity, 0.0), sample_rate_(sample_rate) {
  if (capacity == 0) throw std::runtime_error("stream buffer: zero capacity");
}

void StreamBuffer::push(std::span<const double> samples) {
  for (double s : samples) {
    data_[head_] = s;
    head_ = (head_ + 1) % data_.size();
    if (count_ < data_.size()) ++count_;
    ++total_;
  }
}

void StreamBuffer::copy_last(std::size_t n, double* out) const {
  if (n > count_)
    throw std::runtime_error("stream buffer: asked for more samples than held");
  const std::size_t cap = data_.size();
  std::size_t start = (head_ + cap - n) % cap;
  for (std::size_t i = 0; i < n; ++i) out[i] = data_[(start + i) % cap];
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_between(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double, std::milli>(b - a).count();
}

}  // namespace

Detector::Detector(ModelFile model, DetectorConfig config)
    : model_(std::move(model)),
      net_(model_.spec),
      config_(config),
      buffer_(model_.feat_config.sample_rate, 1) {
  net_.params() = model_.params;
  const int rate = model_.feat_config.sample_rate;
  const double window_s =
      config_.window_s > 0.0 ? config_.window_s : model_.window_s;
  window_ = std::uint64_t(std::llround(window_s * rate));
  if (window_ == 0) throw std::runtime_error("detector: empty analysis window");
  warmup_ = std::uint64_t(std::llround(std::max(0.0, config_.min_buffer_s) * rate));
  stride_ = config_.sliding && config_.stride_s > 0.0
                ? std::uint64_t(std::llround(config_.stride_s * rate))
                : window_;
  if (stride_ == 0) throw std::runtime_error("detector: zero stride");

  const std::uint64_t frame = std::uint64_t(model_.feat_config.frame_len());
  const std::uint64_t hop = std::uint64_t(model_.feat_config.stride());
  if (window_ < frame)
    throw std::runtime_error("detector: window shorter than one frame");
  const std::uint64_t rows = 1 + (window_ - frame) / hop;
  if (rows != std::uint64_t(model_.spec.input_rows))
    throw std::runtime_error(
        "detector: window of " + std::to_string(window_) + " samples yields " +
        std::to_string(rows) + " frames but the model expects " +
        std::to_string(model_.spec.input_rows));

  buffer_ = StreamBuffer(rate, std::size_t(window_) * 2);
  next_eval_ = window_;
  while (next_eval_ < warmup_) next_eval_ += stride_;
  impl_stamps_.clear();
  next_start_to_stamp_ = next_eval_ - window_;
}

std::vector<std::uint64_t> Detector::evaluation_points(std::uint64_t n,
                                                       std::uint64_t window,
                                                       std::uint64_t warmup,
                                                       std::uint64_t stride) {
  std::vector<std::uint64_t> points;
  if (window == 0 || stride == 0) return points;
  std::uint64_t p = window;
  while (p < warmup) p += stride;
  for (; p <= n; p += stride) points.push_back(p);
  return points;
}

std::optional<nn::Prediction> Detector::classify_window(
    std::span<const double> window) const {
  double peak = 0.0;
  for (double s : window) peak = std::max(peak, std::abs(s));
  if (peak == 0.0) return std::nullopt;  // nothing to normalize or classify
  Waveform w;
  w.sample_rate = model_.feat_config.sample_rate;
  w.samples.assign(window.begin(), window.end());
  const auto feats =
      extract_features(normalize(w), model_.feat_config, model_.feat_kind);
  return nn::predict(net_, model_.norm, feats.values);
}

std::optional<AlarmEvent> Detector::evaluate() {
  const std::uint64_t eval_at = buffer_.total_consumed();
  const std::uint64_t start_index = eval_at - window_;
  bool have_start = false;
  Clock::time_point start_tp;
  while (!impl_stamps_.empty() && impl_stamps_.front().first <= start_index) {
    if (impl_stamps_.front().first == start_index) {
      start_tp = impl_stamps_.front().second;
      have_start = true;
    }
    impl_stamps_.pop_front();
  }

  const auto t_eval = Clock::now();
  const double gather_ms = have_start ? ms_between(start_tp, t_eval) : 0.0;

  std::vector<double> win(window_);
  buffer_.copy_last(std::size_t(window_), win.data());

  double peak = 0.0;
  for (double s : win) peak = std::max(peak, std::abs(s));
  if (peak == 0.0) {
    ++skipped_silent_;
    return std::nullopt;
  }

  const auto t0 = Clock::now();
  Waveform w;
  w.sample_rate = model_.feat_config.sample_rate;
  w.samples = std::move(win);
  const auto feats =
      extract_features(normalize(w), model_.feat_config, model_.feat_kind);
  const auto t1 = Clock::now();
  const auto pred = nn::predict(net_, model_.norm, feats.values);
  ++evaluations_;

  if (pred.label != 0 || pred.probability < config_.alarm_threshold)
    return std::nullopt;

  AlarmEvent ev;
  ev.label = Label::earthquake;
  ev.probability = pred.probs[0];
  ev.trigger_sample_index = eval_at - 1;
  ev.gather_ms = gather_ms;
  ev.process_ms = ms_between(t0, t1);
  ev.predict_ms = pred.predict_ms;
  ev.total_ms = ev.gather_ms + ev.process_ms + ev.predict_ms;
  return ev;
}

std::vector<AlarmEvent> Detector::push_samples(std::span<const double> samples) {
  std::vector<AlarmEvent> events;
  std::size_t off = 0;
  while (off < samples.size()) {
    const std::uint64_t total = buffer_.total_consumed();
    if (total == next_start_to_stamp_) {
      impl_stamps_.emplace_back(total, Clock::now());
      next_start_to_stamp_ += stride_;
    }
    const std::uint64_t boundary = std::min(next_start_to_stamp_, next_eval_);
    const std::size_t chunk = std::size_t(
        std::min<std::uint64_t>(boundary - total, samples.size() - off));
    buffer_.push(samples.subspan(off, chunk));
    off += chunk;
    if (buffer_.total_consumed() == next_eval_) {
      if (auto ev = evaluate()) events.push_back(*ev);
      next_eval_ += stride_;
    }
  }
  return events;
}

std::vector<AlarmEvent> Detector::push_packet(const TelemetryPacket& packet) {
  if (int(packet.sample_rate) != sample_rate())
    throw std::runtime_error("detector: packet rate " +
                             std::to_string(packet.sample_rate) +
                             " Hz does not match model rate " +
                             std::to_string(sample_rate()) + " Hz");
  std::vector<double> s(packet.samples.size());
  for (std::size_t i = 0; i < s.size(); ++i)
    s[i] = double(packet.samples[i]) / 32768.0;
  return push_samples(s);
}

ReplayStats replay_source(const Waveform& w, double speed,
                          const PacketSink& sink,
                          std::size_t samples_per_packet) {
  if (w.samples.empty()) throw std::runtime_error("replay: empty waveform");
  if (!(speed > 0.0)) throw std::runtime_error("replay: speed must be positive");
  samples_per_packet =
      std::clamp<std::size_t>(samples_per_packet, 1, kMaxSamplesPerPacket);

  const bool paced = std::isfinite(speed);
  const auto start = Clock::now();
  ReplayStats stats;
  std::uint32_t seq = 0;
  std::size_t sent = 0;
  const std::size_t n = w.samples.size();
  while (sent < n) {
    const std::size_t count = std::min(samples_per_packet, n - sent);
    TelemetryPacket p;
    p.seq = seq++;
    p.sample_rate = std::uint32_t(w.sample_rate);
    p.samples.resize(count);
    for (std::size_t i = 0; i < count; ++i)
      p.samples[i] = quantize16(w.samples[sent + i]);
    const auto bytes = encode_packet(p);
    if (paced) {
      // a packet is available once its last sample has been "captured"
      const double target_s =
          double(sent + count) / double(w.sample_rate) / speed;
      std::this_thread::sleep_until(
          start + std::chrono::duration_cast<Clock::duration>(
                      std::chrono::duration<double>(target_s)));
    }
    sink(bytes);
    sent += count;
    ++stats.packets;
  }
  stats.samples = sent;
  stats.elapsed_s =
      std::chrono::duration<double>(Clock::now() - start).count();
  return stats;
}

ReceiveStats receive_loop(const PacketSource& source, Detector& detector,
                          const AlarmSink& on_alarm, int max_decode_failures) {
  ReceiveStats st;
  std::optional<std::uint64_t> last_seq;
  while (auto bytes = source()) {
    TelemetryPacket p;
    try {
      p = decode_packet(*bytes);
    } catch (const PacketError&) {
      ++st.crc_failures;
      if (st.crc_failures > std::uint64_t(max_decode_failures))
        throw std::runtime_error(
            "stream integrity: " + std::to_string(st.crc_failures) +
            " undecodable packets (limit " +
            std::to_string(max_decode_failures) + ")");
      continue;
    }
    if (last_seq && p.seq <= *last_seq) {
      ++st.dropped_old;
      continue;
    }
    if (last_seq && p.seq > *last_seq + 1) {
      ++st.gaps;
      st.gap_samples_est += (p.seq - *last_seq - 1) * p.samples.size();
    }
    last_seq = p.seq;
    const auto events = detector.push_packet(p);
    ++st.packets_ok;
    st.samples += p.samples.size();
    for (const auto& ev : events) {
      ++st.alarms;
      if (on_alarm) on_alarm(ev);
    }
  }
  return st;
}

std::string alarm_log_line(const AlarmEvent& event) {
  using namespace std::chrono;
  const auto now = system_clock::now();
  const std::time_t t = system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  const auto msecs = duration_cast<milliseconds>(now.time_since_epoch()) % 1000;
  char ts[32];
  std::strftime(ts, sizeof ts, "%Y-%m-%dT%H:%M:%S", &tm);
  char line[256];
  std::snprintf(line, sizeof line,
                "%s.%03dZ label=%s probability=%.6f gather_ms=%.3f "
                "process_ms=%.3f predict_ms=%.3f total_ms=%.3f",
                ts, int(msecs.count()),
                std::string(to_string(event.label)).c_str(), event.probability,
                event.gather_ms, event.process_ms, event.predict_ms,
                event.total_ms);
  return line;
}

}  // namespace quake
