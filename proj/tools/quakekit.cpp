// quakekit: synthesize corpora, extract features, train and evaluate the
// classifiers, compare against the STA/LTA trigger baseline, and run the
// streaming detector over replayed or live sensor packets.

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "quake/detector.hpp"
#include "quake/experiments.hpp"
#include "quake/kernels.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace quake;

namespace {

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted.store(true); }

std::string join_dir(const std::string& base_file, const std::string& rel) {
  fs::path p(rel);
  if (p.is_absolute()) return rel;
  return (fs::path(base_file).parent_path() / p).string();
}

struct FeatureFlags {
  int rate = 1000;
  double frame_ms = 25.0;
  double stride_ms = 20.0;
  int nfft = 256;
  int n_filters = 26;
  int n_ceps = 13;
  double alpha = 0.95;
  std::string kind = "mfcc";

  FeatureConfig config() const {
    FeatureConfig fc;
    fc.sample_rate = rate;
    fc.frame_len_ms = frame_ms;
    fc.stride_ms = stride_ms;
    fc.nfft = nfft;
    fc.n_filters = n_filters;
    fc.n_ceps = n_ceps;
    fc.alpha = alpha;
    fc.validate();
    return fc;
  }
  FeatureKind feature_kind() const { return feature_kind_from_string(kind); }

  void attach(CLI::App* cmd) {
    cmd->add_option("--rate", rate, "analysis sample rate, Hz (inputs below it are upsampled)");
    cmd->add_option("--frame-ms", frame_ms, "frame length, ms");
    cmd->add_option("--stride-ms", stride_ms, "frame stride, ms (20 gives the 9-frame 0.2 s shape)");
    cmd->add_option("--nfft", nfft, "FFT length (power of two)");
    cmd->add_option("--n-filters", n_filters, "triangular filter count");
    cmd->add_option("--n-ceps", n_ceps, "kept DCT coefficients");
    cmd->add_option("--alpha", alpha, "pre-emphasis coefficient");
    cmd->add_option("--feature-kind", kind, "mfcc | log_filterbank")
        ->check(CLI::IsMember({"mfcc", "log_filterbank"}));
  }
};

struct LoadedSet {
  std::vector<LabeledWave> waves;
  std::vector<std::string> paths;
};

LoadedSet load_split(const std::string& manifest_path,
                     const std::string& split) {
  const auto entries = read_manifest(read_text_file(manifest_path));
  LoadedSet out;
  for (const auto& e : entries) {
    if (split != "all" && std::string(to_string(e.split)) != split) continue;
    const auto full = join_dir(manifest_path, e.path);
    out.waves.push_back({read_wav_file(full), e.label});
    out.paths.push_back(e.path);
  }
  return out;
}

// "udp:PORT" or "udp:HOST:PORT"
struct UdpAddr {
  std::string host = "127.0.0.1";
  int port = 0;
};

UdpAddr parse_udp(const std::string& spec) {
  if (spec.rfind("udp:", 0) != 0)
    throw std::runtime_error("expected udp:PORT or udp:HOST:PORT, got " + spec);
  const std::string rest = spec.substr(4);
  UdpAddr a;
  const auto colon = rest.rfind(':');
  if (colon == std::string::npos) {
    a.port = std::stoi(rest);
  } else {
    a.host = rest.substr(0, colon);
    a.port = std::stoi(rest.substr(colon + 1));
  }
  if (a.port <= 0 || a.port > 65535)
    throw std::runtime_error("bad UDP port in " + spec);
  return a;
}

int udp_socket() {
  const int fd = ::socket(AF_INET, SOCK_DGRAM, 0);
  if (fd < 0) throw std::runtime_error("socket() failed");
  return fd;
}

sockaddr_in make_sockaddr(const UdpAddr& a) {
  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  sa.sin_port = htons(std::uint16_t(a.port));
  if (::inet_pton(AF_INET, a.host.c_str(), &sa.sin_addr) != 1)
    throw std::runtime_error("bad host address " + a.host);
  return sa;
}

void write_if_dir(const std::string& out_dir, const std::string& name,
                  const std::string& text) {
  fs::create_directories(out_dir);
  write_text_file((fs::path(out_dir) / name).string(), text);
}

// ---- synth ----

int cmd_synth(const std::string& out_dir, SynthConfig cfg) {
  const auto entries = synth_dataset(cfg);
  fs::create_directories(fs::path(out_dir) / "wav");
  std::vector<DatasetEntry> manifest;
  for (const auto& e : entries) {
    const std::string rel = "wav/" + e.name + ".wav";
    write_wav_file((fs::path(out_dir) / rel).string(), e.wave);
    manifest.push_back({rel, e.label, e.split});
  }
  write_text_file((fs::path(out_dir) / "manifest.csv").string(),
                  write_manifest(manifest));
  write_text_file((fs::path(out_dir) / "onsets.csv").string(),
                  write_onsets_csv(entries, "wav/"));
  std::cout << "wrote " << entries.size() << " clips (" << cfg.n_quake
            << " earthquake / " << cfg.n_noise << " non-earthquake) at "
            << cfg.sample_rate << " Hz, " << cfg.duration_s << " s each\n"
            << "manifest: " << (fs::path(out_dir) / "manifest.csv").string()
            << "\n";
  return 0;
}

// ---- featurize ----

int cmd_featurize(const std::string& manifest_path, const FeatureFlags& ff,
                  const std::string& out_dir) {
  const auto entries = read_manifest(read_text_file(manifest_path));
  const auto fc = ff.config();
  const auto kind = ff.feature_kind();
  fs::create_directories(fs::path(out_dir) / "features");

  std::ostringstream index;
  index << "path,feature_path,label,split,rows,cols\n";
  int failures = 0;
  for (const auto& e : entries) {
    try {
      auto w = read_wav_file(join_dir(manifest_path, e.path));
      if (w.sample_rate != fc.sample_rate)
        std::cout << e.path << ": upsampling " << w.sample_rate << " -> "
                  << fc.sample_rate << " Hz\n";
      const auto feats = features_for(w, fc, kind);
      const std::string rel =
          "features/" + fs::path(e.path).stem().string() + ".csv";
      write_text_file((fs::path(out_dir) / rel).string(),
                      feature_csv(feats, fc));
      index << e.path << ',' << rel << ',' << to_string(e.label) << ','
            << to_string(e.split) << ',' << feats.values.rows << ','
            << feats.values.cols << "\n";
      std::cout << e.path << ": " << feats.values.rows << "x"
                << feats.values.cols << "\n";
    } catch (const std::exception& ex) {
      ++failures;
      std::cerr << e.path << ": " << ex.what() << "\n";
    }
  }
  write_text_file((fs::path(out_dir) / "index.csv").string(), index.str());
  if (failures) {
    std::cerr << failures << " file(s) failed\n";
    return 1;
  }
  return 0;
}

// ---- train ----

int cmd_train(const std::string& manifest_path, const std::string& model_kind,
              const FeatureFlags& ff, const nn::TrainConfig& tc,
              const std::string& readout, const std::string& out_dir) {
  const auto train_set = load_split(manifest_path, "train");
  if (train_set.waves.empty())
    throw std::runtime_error("manifest has no train split");
  const auto kind = nn::model_kind_from_string(model_kind);
  const auto ro = readout == "flatten" ? nn::LstmReadout::flatten
                                       : nn::LstmReadout::last_timestep;
  const auto fit =
      fit_model(kind, train_set.waves, ff.config(), ff.feature_kind(), tc, ro);

  fs::create_directories(out_dir);
  const auto model_path =
      (fs::path(out_dir) / ("model_" + model_kind + ".qfm")).string();
  save_model_file(model_path, fit.model);
  write_text_file(
      (fs::path(out_dir) / ("history_" + model_kind + ".csv")).string(),
      nn::history_csv(fit.history));

  const auto& last = fit.history.back();
  std::cout << "trained " << model_kind << " on " << train_set.waves.size()
            << " clips; epochs=" << tc.epochs << " batch=" << tc.batch_size
            << " lr=" << tc.adam.lr << " seed=" << tc.seed << "\n"
            << "final loss=" << last.loss << " train_acc=" << last.train_acc;
  if (!std::isnan(last.val_acc)) std::cout << " val_acc=" << last.val_acc;
  std::cout << "\nmodel: " << model_path << "\n";
  return 0;
}

// ---- eval ----

int cmd_eval(const std::string& model_path, const std::string& manifest_path,
             const std::string& split, const std::string& out_dir) {
  const auto model = load_model_file(model_path);
  const auto data = load_split(manifest_path, split);
  if (data.waves.empty())
    throw std::runtime_error("manifest has no '" + split + "' entries");
  const auto outcome = evaluate_model(model, data.waves);
  std::cout << format_report(outcome.report);

  json j;
  j["n"] = data.waves.size();
  j["accuracy"] = outcome.report.accuracy;
  j["cohen_kappa"] = outcome.report.cohen_kappa;
  j["confusion"] = {{outcome.report.confusion.counts[0][0],
                     outcome.report.confusion.counts[0][1]},
                    {outcome.report.confusion.counts[1][0],
                     outcome.report.confusion.counts[1][1]}};
  j["precision"] = {{"earthquake", outcome.report.precision[0]},
                    {"non_earthquake", outcome.report.precision[1]}};
  j["recall"] = {{"earthquake", outcome.report.recall[0]},
                 {"non_earthquake", outcome.report.recall[1]}};
  j["config"] = outcome.report.config_echo;
  write_if_dir(out_dir, "report.json", j.dump(2) + "\n");
  std::cout << "report: " << (fs::path(out_dir) / "report.json").string()
            << "\n";
  return 0;
}

// ---- sweep ----

int cmd_sweep(const SweepConfig& cfg, const std::string& out_dir) {
  const auto rows = run_sweep(cfg, &std::cout);
  const auto csv = sweep_csv(rows);
  write_if_dir(out_dir, "sweep.csv", csv);
  // charts regenerate from the csv so they are a pure function of it
  const auto parsed = parse_sweep_csv(csv);
  write_if_dir(out_dir, "accuracy.svg",
               sweep_chart_svg(parsed, ChartMetric::test_accuracy));
  write_if_dir(out_dir, "kappa.svg", sweep_chart_svg(parsed, ChartMetric::kappa));

  std::cout << "model  rate_hz window_s train_acc test_acc kappa\n";
  int failures = 0;
  for (const auto& r : rows) {
    if (r.ok) {
      char line[160];
      std::snprintf(line, sizeof line, "%-6s %7d %8.2f %9.4f %8.4f %6.4f\n",
                    r.model.c_str(), r.rate_hz, r.window_s, r.train_acc,
                    r.test_acc, r.kappa);
      std::cout << line;
    } else {
      ++failures;
      std::cout << r.model << " " << r.rate_hz << " " << r.window_s
                << " FAILED: " << r.error << "\n";
    }
  }
  std::cout << "sweep outputs in " << out_dir << "\n";
  return failures == 0 ? 0 : 1;
}

// ---- compare-stalta ----

int cmd_compare(const std::string& manifest_path, const std::string& onsets_path,
                const std::string& model_path, const StaLtaConfig& base,
                const std::vector<double>& triggers, double alarm_threshold,
                const std::string& out_dir) {
  const auto entries = read_manifest(read_text_file(manifest_path));
  const auto onsets = parse_onsets_csv(read_text_file(onsets_path));
  std::vector<TraceEntry> traces;
  for (const auto& e : entries) {
    if (e.split != Split::test) continue;
    TraceEntry t;
    t.wave = read_wav_file(join_dir(manifest_path, e.path));
    t.label = e.label;
    t.onset_s = -1.0;
    for (const auto& [path, onset] : onsets)
      if (path == e.path) t.onset_s = onset;
    traces.push_back(std::move(t));
  }
  if (traces.empty()) throw std::runtime_error("manifest has no test traces");

  std::optional<ModelFile> model;
  if (!model_path.empty()) model = load_model_file(model_path);
  DetectorConfig det_cfg;
  det_cfg.alarm_threshold = alarm_threshold;

  const auto rows = compare_stalta(traces, base, triggers,
                                   model ? &*model : nullptr, det_cfg);
  write_if_dir(out_dir, "compare.csv", compare_csv(rows));

  std::cout << "algorithm  accuracy false_alarm_rate time_to_alarm_s "
               "process_ms predict_ms prerequisites\n";
  for (const auto& r : rows) {
    char line[256];
    std::snprintf(line, sizeof line, "%-10s %8.4f %16.4f %15.3f %10.3f %10.3f %s\n",
                  r.algorithm.c_str(), r.accuracy, r.false_alarm_rate,
                  r.mean_time_to_alarm_s, r.mean_process_ms, r.mean_predict_ms,
                  r.prerequisites.c_str());
    std::cout << line;
  }
  std::cout << "comparison written to " << out_dir << "/compare.csv\n";
  return 0;
}

// ---- replay / detect ----

int cmd_replay(const std::string& wav_path, const std::string& dest,
               double speed) {
  const auto w = read_wav_file(wav_path);
  const auto addr = parse_udp(dest);
  const int fd = udp_socket();
  const auto sa = make_sockaddr(addr);
  auto stats = replay_source(w, speed, [&](std::span<const std::uint8_t> b) {
    if (::sendto(fd, b.data(), b.size(), 0,
                 reinterpret_cast<const sockaddr*>(&sa), sizeof sa) < 0)
      throw std::runtime_error("sendto failed: " +
                               std::string(std::strerror(errno)));
  });
  ::close(fd);
  std::cout << "replayed " << stats.samples << " samples in " << stats.packets
            << " packets over " << stats.elapsed_s << " s\n";
  return 0;
}

int cmd_detect(const std::string& model_path, const std::string& wav_path,
               const std::string& listen, double speed,
               const DetectorConfig& det_cfg, const std::string& log_path,
               double idle_timeout_s) {
  const auto model = load_model_file(model_path);
  Detector detector(model, det_cfg);

  std::ofstream log;
  if (!log_path.empty()) {
    log.open(log_path, std::ios::app);
    if (!log) throw std::runtime_error("cannot open alarm log " + log_path);
  }
  auto on_alarm = [&](const AlarmEvent& e) {
    const auto line = alarm_log_line(e);
    std::cout << line << "\n" << std::flush;
    if (log) log << line << "\n" << std::flush;
  };

  ReceiveStats stats;
  if (!wav_path.empty()) {
    // offline or paced replay through the same packet path as the live mode
    auto w = read_wav_file(wav_path);
    if (w.sample_rate != detector.sample_rate()) {
      std::cout << "upsampling " << w.sample_rate << " -> "
                << detector.sample_rate() << " Hz\n";
      w = upsample(w, detector.sample_rate());
    }
    std::deque<std::vector<std::uint8_t>> queue;
    if (std::isfinite(speed)) {
      // paced: produce and consume in lockstep
      replay_source(w, speed, [&](std::span<const std::uint8_t> b) {
        const auto pkt = decode_packet(b);
        for (const auto& ev : detector.push_packet(pkt)) {
          ++stats.alarms;
          on_alarm(ev);
        }
        ++stats.packets_ok;
        stats.samples += pkt.samples.size();
      });
    } else {
      replay_source(w, speed, [&](std::span<const std::uint8_t> b) {
        queue.emplace_back(b.begin(), b.end());
      });
      auto source = [&]() -> std::optional<std::vector<std::uint8_t>> {
        if (queue.empty() || g_interrupted.load()) return std::nullopt;
        auto front = std::move(queue.front());
        queue.pop_front();
        return front;
      };
      stats = receive_loop(source, detector, on_alarm);
    }
  } else {
    const auto addr = parse_udp(listen);
    const int fd = udp_socket();
    sockaddr_in sa = make_sockaddr(addr);
    if (::bind(fd, reinterpret_cast<const sockaddr*>(&sa), sizeof sa) != 0) {
      ::close(fd);
      throw std::runtime_error("bind failed on " + listen + ": " +
                               std::string(std::strerror(errno)));
    }
    timeval tv{0, 250000};  // poll so interrupts and idle timeout are seen
    ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
    std::cout << "listening on " << addr.host << ":" << addr.port << "\n";

    auto last_packet = std::chrono::steady_clock::now();
    bool got_any = false;
    auto source = [&]() -> std::optional<std::vector<std::uint8_t>> {
      std::vector<std::uint8_t> buf(2048);
      while (!g_interrupted.load()) {
        const auto n = ::recv(fd, buf.data(), buf.size(), 0);
        if (n > 0) {
          last_packet = std::chrono::steady_clock::now();
          got_any = true;
          buf.resize(std::size_t(n));
          return buf;
        }
        const double idle = std::chrono::duration<double>(
                                std::chrono::steady_clock::now() - last_packet)
                                .count();
        if (got_any && idle > idle_timeout_s) return std::nullopt;
        if (!got_any && idle > 10.0 * idle_timeout_s) return std::nullopt;
      }
      return std::nullopt;
    };
    stats = receive_loop(source, detector, on_alarm);
    ::close(fd);
  }

  std::cout << "packets=" << stats.packets_ok << " dropped=" << stats.dropped_old
            << " gaps=" << stats.gaps << " crc_failures=" << stats.crc_failures
            << " samples=" << stats.samples << " evaluations="
            << detector.evaluations() << " alarms=" << stats.alarms << "\n";
  if (log) log.flush();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"earthquake detection toolkit: cepstral features, CNN/LSTM "
               "classifiers, STA/LTA baseline, streaming detector"};
  app.set_config("--config", "", "read options from an INI file");
  app.require_subcommand(1);

  std::uint64_t seed = 7;
  std::string out_dir = "out";
  std::string isa = "auto";
  app.add_option("--seed", seed, "global RNG seed")->capture_default_str();
  app.add_option("--out", out_dir, "output directory")->capture_default_str();
  app.add_option("--isa", isa, "kernel path: auto | scalar | avx2")
      ->check(CLI::IsMember({"auto", "scalar", "avx2"}));

  // synth
  auto* synth = app.add_subcommand("synth", "generate a labeled synthetic corpus");
  SynthConfig sc;
  synth->add_option("--n-quake", sc.n_quake, "earthquake clip count")->capture_default_str();
  synth->add_option("--n-noise", sc.n_noise, "non-earthquake clip count")->capture_default_str();
  synth->add_option("--rate", sc.sample_rate, "sample rate, Hz")->capture_default_str();
  synth->add_option("--duration", sc.duration_s, "clip length, seconds")->capture_default_str();
  synth->add_option("--onset-min", sc.onset_min_s, "earliest event onset, s (trace mode)");
  synth->add_option("--onset-max", sc.onset_max_s, "latest event onset, s (trace mode)");
  synth->add_option("--train-fraction", sc.train_fraction, "stratified train share")->capture_default_str();

  // featurize
  auto* feat = app.add_subcommand("featurize", "extract feature matrices for a manifest");
  std::string feat_manifest;
  FeatureFlags feat_ff;
  feat->add_option("--manifest", feat_manifest, "dataset manifest csv")->required();
  feat_ff.attach(feat);

  // train
  auto* train_cmd = app.add_subcommand("train", "train a classifier on the train split");
  std::string train_manifest, train_model = "cnn", train_readout = "last";
  FeatureFlags train_ff;
  nn::TrainConfig tc;
  train_cmd->add_option("--manifest", train_manifest, "dataset manifest csv")->required();
  train_cmd->add_option("--model", train_model, "cnn | lstm")
      ->check(CLI::IsMember({"cnn", "lstm"}));
  train_ff.attach(train_cmd);
  train_cmd->add_option("--epochs", tc.epochs, "training epochs")->capture_default_str();
  train_cmd->add_option("--batch", tc.batch_size, "batch size")->capture_default_str();
  train_cmd->add_option("--lr", tc.adam.lr, "Adam learning rate")->capture_default_str();
  train_cmd->add_option("--val-fraction", tc.validation_fraction,
                        "validation share of the train split");
  train_cmd->add_option("--readout", train_readout,
                        "lstm head input: last | flatten")
      ->check(CLI::IsMember({"last", "flatten"}));

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a model on a manifest split");
  std::string eval_model, eval_manifest, eval_split = "test";
  eval_cmd->add_option("--model", eval_model, "model file (.qfm)")->required();
  eval_cmd->add_option("--manifest", eval_manifest, "dataset manifest csv")->required();
  eval_cmd->add_option("--split", eval_split, "test | train | all")
      ->check(CLI::IsMember({"test", "train", "all"}));

  // sweep
  auto* sweep_cmd = app.add_subcommand(
      "sweep", "train/eval grid over models, rates and window lengths");
  SweepConfig sw;
  std::vector<double> sweep_windows{0.1, 0.2, 0.5, 1.0};
  std::vector<int> sweep_rates{200, 1000};
  std::vector<std::string> sweep_models{"cnn", "lstm"};
  sweep_cmd->add_option("--windows", sweep_windows, "window lengths, seconds");
  sweep_cmd->add_option("--rates", sweep_rates, "sample rates, Hz");
  sweep_cmd->add_option("--models", sweep_models, "model kinds");
  sweep_cmd->add_option("--n-quake", sw.n_quake, "clips per cell, earthquake")->capture_default_str();
  sweep_cmd->add_option("--n-noise", sw.n_noise, "clips per cell, non-earthquake")->capture_default_str();
  sweep_cmd->add_option("--epochs", sw.train.epochs, "epochs per cell")->capture_default_str();
  sweep_cmd->add_option("--batch", sw.train.batch_size, "batch size")->capture_default_str();

  // compare-stalta
  auto* cmp = app.add_subcommand(
      "compare-stalta", "trigger baseline vs model on labeled test traces");
  std::string cmp_manifest, cmp_onsets, cmp_model;
  StaLtaConfig cmp_base;
  std::vector<double> cmp_triggers{2.0, 3.0, 4.0, 6.0, 8.0};
  double cmp_threshold = 0.5;
  cmp->add_option("--manifest", cmp_manifest, "trace manifest csv")->required();
  cmp->add_option("--onsets", cmp_onsets, "onsets sidecar csv")->required();
  cmp->add_option("--model", cmp_model, "optional model file for the model row");
  cmp->add_option("--sta", cmp_base.sta_window_s, "STA window, s")->capture_default_str();
  cmp->add_option("--lta", cmp_base.lta_window_s, "LTA window, s")->capture_default_str();
  cmp->add_option("--triggers", cmp_triggers, "trigger_on grid")->capture_default_str();
  cmp->add_option("--threshold", cmp_threshold, "model alarm threshold")->capture_default_str();

  // replay
  auto* replay_cmd = app.add_subcommand("replay", "stream a wav file as UDP telemetry packets");
  std::string replay_wav, replay_dest = "udp:127.0.0.1:47777";
  double replay_speed = 1.0;
  replay_cmd->add_option("--wav", replay_wav, "waveform to replay")->required();
  replay_cmd->add_option("--dest", replay_dest, "udp:HOST:PORT")->capture_default_str();
  replay_cmd->add_option("--speed", replay_speed,
                         "time compression factor (inf = as fast as possible)")
      ->capture_default_str();

  // detect
  auto* detect_cmd = app.add_subcommand(
      "detect", "run the streaming detector on a wav file or a UDP port");
  std::string det_model, det_wav, det_listen, det_log;
  double det_speed = std::numeric_limits<double>::infinity();
  double det_idle = 5.0;
  DetectorConfig det_cfg;
  detect_cmd->add_option("--model", det_model, "model file (.qfm)")->required();
  detect_cmd->add_option("--wav", det_wav, "classify a wav file (offline replay)");
  detect_cmd->add_option("--listen", det_listen, "udp:PORT or udp:HOST:PORT");
  detect_cmd->add_option("--speed", det_speed, "replay pacing for --wav (default offline)");
  detect_cmd->add_option("--window", det_cfg.window_s,
                         "analysis window, s (default: model's training window)");
  detect_cmd->add_option("--min-buffer", det_cfg.min_buffer_s,
                         "warm-up before the first evaluation, s")->capture_default_str();
  detect_cmd->add_option("--threshold", det_cfg.alarm_threshold, "alarm probability threshold")
      ->capture_default_str();
  detect_cmd->add_option("--log", det_log, "append alarm log lines to this file");
  detect_cmd->add_option("--idle-timeout", det_idle,
                         "stop listening after this many idle seconds")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  if (!kern::set_isa(isa)) {
    std::cerr << "kernel path '" << isa << "' not available on this CPU\n";
    return 1;
  }

  try {
    if (synth->parsed()) {
      sc.seed = seed;
      return cmd_synth(out_dir, sc);
    }
    if (feat->parsed()) return cmd_featurize(feat_manifest, feat_ff, out_dir);
    if (train_cmd->parsed()) {
      tc.seed = seed;
      return cmd_train(train_manifest, train_model, train_ff, tc,
                       train_readout, out_dir);
    }
    if (eval_cmd->parsed())
      return cmd_eval(eval_model, eval_manifest, eval_split, out_dir);
    if (sweep_cmd->parsed()) {
      sw.seed = seed;
      sw.windows_s = sweep_windows;
      sw.rates = sweep_rates;
      sw.kinds.clear();
      for (const auto& m : sweep_models)
        sw.kinds.push_back(nn::model_kind_from_string(m));
      return cmd_sweep(sw, out_dir);
    }
    if (cmp->parsed())
      return cmd_compare(cmp_manifest, cmp_onsets, cmp_model, cmp_base,
                         cmp_triggers, cmp_threshold, out_dir);
    if (replay_cmd->parsed())
      return cmd_replay(replay_wav, replay_dest, replay_speed);
    if (detect_cmd->parsed()) {
      if (det_wav.empty() == det_listen.empty())
        throw std::runtime_error("detect needs exactly one of --wav or --listen");
      return cmd_detect(det_model, det_wav, det_listen, det_speed, det_cfg,
                        det_log, det_idle);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
