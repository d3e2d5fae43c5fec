#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "quake/detector.hpp"
#include "quake/dsp.hpp"
#include "quake/metrics.hpp"
#include "quake/model_io.hpp"
#include "quake/nn.hpp"
#include "quake/stalta.hpp"
#include "quake/synth.hpp"
#include "quake/waveform.hpp"

namespace quake {

// The one feature pipeline used by training, evaluation, and detection:
// upsample to the analysis rate when needed, peak-normalize, extract.
// Normalization before extraction is always applied and echoed in reports.
FeatureMatrix features_for(const Waveform& w, const FeatureConfig& config,
                           FeatureKind kind);

struct LabeledWave {
  Waveform wave;
  Label label = Label::non_earthquake;
};

struct FitResult {
  ModelFile model;
  std::vector<nn::EpochStats> history;
};

// Featurize clips (all must share one length), train, and package the model
// with its feature chain and normalization statistics.
FitResult fit_model(nn::ModelKind kind, std::span<const LabeledWave> data,
                    const FeatureConfig& config, FeatureKind feat_kind,
                    const nn::TrainConfig& train_config,
                    nn::LstmReadout readout = nn::LstmReadout::last_timestep);

struct EvalOutcome {
  MetricsReport report;
  std::vector<int> predicted;
  std::vector<double> prob_quake;
};

EvalOutcome evaluate_model(const ModelFile& model,
                           std::span<const LabeledWave> data);

// ---- accuracy/kappa sweep over (model, rate, window) cells ----

struct SweepConfig {
  std::vector<double> windows_s{0.1, 0.2, 0.5, 1.0};
  std::vector<int> rates{200, 1000};
  std::vector<nn::ModelKind> kinds{nn::ModelKind::cnn, nn::ModelKind::lstm};
  int n_quake = 80;
  int n_noise = 80;
  nn::TrainConfig train;
  FeatureKind feat_kind = FeatureKind::mfcc;
  std::uint64_t seed = 7;
};

struct SweepRow {
  std::string model;
  int rate_hz = 0;
  double window_s = 0.0;
  double train_acc = 0.0;
  double test_acc = 0.0;
  double kappa = 0.0;
  bool ok = false;
  std::string error;
};

// Each cell is independently seeded; a failed cell marks its row and the
// sweep continues.
std::vector<SweepRow> run_sweep(const SweepConfig& config,
                                std::ostream* log = nullptr);

// columns: model,rate_hz,window_s,train_acc,test_acc,kappa (failed rows carry
// an error column instead of numbers)
std::string sweep_csv(std::span<const SweepRow> rows);
std::vector<SweepRow> parse_sweep_csv(std::string_view text);

enum class ChartMetric { test_accuracy, kappa };

// Standalone grouped-bar SVG; a pure function of the parsed CSV rows.
std::string sweep_chart_svg(std::span<const SweepRow> rows, ChartMetric metric);

// ---- trigger-baseline comparison ----

struct TraceEntry {
  Waveform wave;
  Label label = Label::non_earthquake;
  double onset_s = -1.0;  // -1 for noise traces
};

struct CompareRow {
  std::string algorithm;
  std::string prerequisites;
  double accuracy = 0.0;
  double false_alarm_rate = 0.0;
  double mean_time_to_alarm_s = 0.0;  // NaN when nothing was detected
  double mean_process_ms = 0.0;       // NaN for the trigger baseline
  double mean_predict_ms = 0.0;
};

// One row per trigger threshold, plus one row per supplied model. Model rows
// replay each trace offline through the streaming detector.
std::vector<CompareRow> compare_stalta(std::span<const TraceEntry> traces,
                                       const StaLtaConfig& base,
                                       std::span<const double> trigger_grid,
                                       const ModelFile* model,
                                       const DetectorConfig& det_config);

std::string compare_csv(std::span<const CompareRow> rows);

// onsets sidecar parsing (path,onset_s)
std::vector<std::pair<std::string, double>> parse_onsets_csv(
    std::string_view text);

}  // namespace quake
