#include "quake/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace quake {

FeatureMatrix features_for(const Waveform& w, const FeatureConfig& config,
                           FeatureKind kind) {
  const Waveform* src = &w;
  Waveform resampled;
  if (w.sample_rate != config.sample_rate) {
    resampled = upsample(w, config.sample_rate);
    src = &resampled;
  }
  return extract_features(normalize(*src), config, kind);
}

FitResult fit_model(nn::ModelKind kind, std::span<const LabeledWave> data,
                    const FeatureConfig& config, FeatureKind feat_kind,
                    const nn::TrainConfig& train_config,
                    nn::LstmReadout readout) {
  if (data.empty()) throw std::runtime_error("fit: empty training set");

  std::vector<Mat> feats;
  std::vector<int> labels;
  feats.reserve(data.size());
  for (const auto& lw : data) {
    feats.push_back(features_for(lw.wave, config, feat_kind).values);
    labels.push_back(lw.label == Label::earthquake ? 0 : 1);
  }
  const std::size_t rows = feats.front().rows, cols = feats.front().cols;
  for (const auto& f : feats)
    if (f.rows != rows || f.cols != cols)
      throw std::runtime_error("fit: clips produce inconsistent feature shapes");

  const auto spec = kind == nn::ModelKind::cnn
                        ? nn::ModelSpec::cnn(int(rows), int(cols))
                        : nn::ModelSpec::lstm(int(rows), int(cols), readout);
  auto trained = nn::train(spec, feats, labels, train_config);

  FitResult res;
  res.model.spec = spec;
  res.model.feat_config = config;
  res.model.feat_kind = feat_kind;
  res.model.window_s =
      double(data.front().wave.samples.size()) / data.front().wave.sample_rate;
  res.model.norm = std::move(trained.norm);
  res.model.params = trained.model.params();
  res.history = std::move(trained.history);
  return res;
}

EvalOutcome evaluate_model(const ModelFile& model,
                           std::span<const LabeledWave> data) {
  if (data.empty()) throw std::runtime_error("eval: empty test set");
  nn::Model net(model.spec);
  net.params() = model.params;

  EvalOutcome out;
  Confusion confusion;
  for (const auto& lw : data) {
    const auto feats = features_for(lw.wave, model.feat_config, model.feat_kind);
    const auto pred = nn::predict(net, model.norm, feats.values);
    const int truth = lw.label == Label::earthquake ? 0 : 1;
    confusion.add(truth, pred.label);
    out.predicted.push_back(pred.label);
    out.prob_quake.push_back(pred.probs[0]);
  }
  std::ostringstream echo;
  echo << "rate=" << model.feat_config.sample_rate
       << "Hz window=" << model.window_s
       << "s stride_ms=" << model.feat_config.stride_ms
       << " kind=" << to_string(model.feat_kind)
       << " normalize=peak";
  out.report = make_report(confusion, echo.str());
  return out;
}

// ---- sweep ----

namespace {

std::uint64_t cell_seed(std::uint64_t base, int rate, double window_s,
                        int kind_idx) {
  const std::uint64_t w = std::uint64_t(std::llround(window_s * 1000.0));
  return Rng::mix(base, (std::uint64_t(rate) << 32) ^ (w << 8) ^
                            std::uint64_t(kind_idx));
}

}  // namespace

std::vector<SweepRow> run_sweep(const SweepConfig& config, std::ostream* log) {
  std::vector<SweepRow> rows;
  for (const auto kind : config.kinds) {
    const int kind_idx = kind == nn::ModelKind::cnn ? 0 : 1;
    for (const int rate : config.rates) {
      for (const double window_s : config.windows_s) {
        SweepRow row;
        row.model = std::string(nn::to_string(kind));
        row.rate_hz = rate;
        row.window_s = window_s;
        if (log)
          *log << "sweep: " << row.model << " rate=" << rate
               << "Hz window=" << window_s << "s\n"
               << std::flush;
        try {
          FeatureConfig fc = FeatureConfig::reference(rate);
          const std::uint64_t n_window_samples =
              std::uint64_t(std::llround(window_s * rate));
          if (n_window_samples < std::uint64_t(fc.frame_len()))
            throw std::runtime_error("window shorter than one frame");

          SynthConfig sc;
          sc.n_quake = config.n_quake;
          sc.n_noise = config.n_noise;
          sc.sample_rate = rate;
          sc.duration_s = window_s;
          sc.seed = cell_seed(config.seed, rate, window_s, 0);  // corpus shared per (rate, window)
          const auto entries = synth_dataset(sc);

          std::vector<LabeledWave> train_set, test_set;
          for (const auto& e : entries) {
            LabeledWave lw{e.wave, e.label};
            (e.split == Split::train ? train_set : test_set)
                .push_back(std::move(lw));
          }
          nn::TrainConfig tc = config.train;
          tc.seed = cell_seed(config.seed, rate, window_s, kind_idx + 1);
          const auto fit = fit_model(kind, train_set, fc, config.feat_kind, tc);
          const auto eval = evaluate_model(fit.model, test_set);
          row.train_acc = fit.history.empty() ? 0.0 : fit.history.back().train_acc;
          row.test_acc = eval.report.accuracy;
          row.kappa = eval.report.cohen_kappa;
          row.ok = true;
        } catch (const std::exception& e) {
          row.ok = false;
          row.error = e.what();
        }
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

std::string sweep_csv(std::span<const SweepRow> rows) {
  std::ostringstream os;
  os.precision(10);
  os << "model,rate_hz,window_s,train_acc,test_acc,kappa\n";
  for (const auto& r : rows) {
    os << r.model << ',' << r.rate_hz << ',' << r.window_s << ',';
    if (r.ok)
      os << r.train_acc << ',' << r.test_acc << ',' << r.kappa;
    else
      os << "error,error," << '"' << r.error << '"';
    os << "\n";
  }
  return os.str();
}

std::vector<SweepRow> parse_sweep_csv(std::string_view text) {
  std::vector<SweepRow> rows;
  std::size_t pos = 0;
  bool header = true;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    std::string_view line = text.substr(
        pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() : eol + 1;
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (start <= line.size()) {
      std::size_t comma = line.find(',', start);
      if (comma == std::string_view::npos) {
        cells.push_back(line.substr(start));
        break;
      }
      cells.push_back(line.substr(start, comma - start));
      start = comma + 1;
    }
    if (cells.size() < 6) continue;
    SweepRow r;
    r.model = std::string(cells[0]);
    auto num = [](std::string_view s, double& d) {
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), d);
      (void)p;
      return ec == std::errc{};
    };
    double v = 0;
    if (num(cells[1], v)) r.rate_hz = int(v);
    if (num(cells[2], v)) r.window_s = v;
    r.ok = num(cells[3], r.train_acc) && num(cells[4], r.test_acc) &&
           num(cells[5], r.kappa);
    if (!r.ok) r.error = std::string(cells.back());
    rows.push_back(std::move(r));
  }
  return rows;
}

namespace {

std::string fmt(double v, int prec = 4) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

}  // namespace

std::string sweep_chart_svg(std::span<const SweepRow> rows, ChartMetric metric) {
  // group = (rate, window); one bar per model within a group
  std::vector<std::pair<int, double>> groups;
  std::vector<std::string> models;
  for (const auto& r : rows) {
    if (!r.ok) continue;
    const std::pair<int, double> g{r.rate_hz, r.window_s};
    if (std::find(groups.begin(), groups.end(), g) == groups.end())
      groups.push_back(g);
    if (std::find(models.begin(), models.end(), r.model) == models.end())
      models.push_back(r.model);
  }
  std::sort(groups.begin(), groups.end());
  std::sort(models.begin(), models.end());

  const double bar_w = 34.0, gap = 26.0, left = 70.0, top = 30.0;
  const double plot_h = 260.0;
  const double group_w = bar_w * double(models.size()) + gap;
  const double width = left + group_w * double(groups.size()) + 40.0;
  const double height = top + plot_h + 70.0;
  const char* colors[] = {"#4878cf", "#ee854a", "#6acc65", "#d65f5f"};

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(width, 0)
     << "\" height=\"" << fmt(height, 0) << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  const std::string title = metric == ChartMetric::test_accuracy
                                ? "Test accuracy by model, rate and window"
                                : "Cohen kappa by model, rate and window";
  os << "<text x=\"" << fmt(width / 2, 0) << "\" y=\"18\" font-size=\"14\" "
        "text-anchor=\"middle\" font-family=\"sans-serif\">"
     << title << "</text>\n";

  // y axis with 0..1 gridlines
  for (int i = 0; i <= 5; ++i) {
    const double frac = double(i) / 5.0;
    const double y = top + plot_h * (1.0 - frac);
    os << "<line x1=\"" << fmt(left, 1) << "\" y1=\"" << fmt(y, 1) << "\" x2=\""
       << fmt(width - 20, 1) << "\" y2=\"" << fmt(y, 1)
       << "\" stroke=\"#dddddd\"/>\n";
    os << "<text x=\"" << fmt(left - 8, 1) << "\" y=\"" << fmt(y + 4, 1)
       << "\" font-size=\"11\" text-anchor=\"end\" font-family=\"sans-serif\">"
       << fmt(frac, 1) << "</text>\n";
  }

  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const double gx = left + group_w * double(gi) + gap / 2.0;
    for (std::size_t mi = 0; mi < models.size(); ++mi) {
      double value = std::numeric_limits<double>::quiet_NaN();
      for (const auto& r : rows) {
        if (!r.ok || r.model != models[mi] || r.rate_hz != groups[gi].first ||
            r.window_s != groups[gi].second)
          continue;
        value = metric == ChartMetric::test_accuracy ? r.test_acc : r.kappa;
      }
      if (std::isnan(value)) continue;
      const double clamped = std::clamp(value, 0.0, 1.0);
      const double h = plot_h * clamped;
      const double x = gx + bar_w * double(mi);
      os << "<rect x=\"" << fmt(x, 1) << "\" y=\"" << fmt(top + plot_h - h, 1)
         << "\" width=\"" << fmt(bar_w - 4, 1) << "\" height=\"" << fmt(h, 1)
         << "\" fill=\"" << colors[mi % 4] << "\"/>\n";
      os << "<text x=\"" << fmt(x + (bar_w - 4) / 2, 1) << "\" y=\""
         << fmt(top + plot_h - h - 4, 1)
         << "\" font-size=\"10\" text-anchor=\"middle\" "
            "font-family=\"sans-serif\">"
         << fmt(value, 3) << "</text>\n";
    }
    os << "<text x=\"" << fmt(gx + bar_w * double(models.size()) / 2, 1)
       << "\" y=\"" << fmt(top + plot_h + 16, 1)
       << "\" font-size=\"11\" text-anchor=\"middle\" "
          "font-family=\"sans-serif\">"
       << groups[gi].first << "Hz/" << fmt(groups[gi].second, 2)
       << "s</text>\n";
  }

  // legend
  for (std::size_t mi = 0; mi < models.size(); ++mi) {
    const double y = top + plot_h + 36.0 + 16.0 * double(mi);
    os << "<rect x=\"" << fmt(left, 1) << "\" y=\"" << fmt(y - 10, 1)
       << "\" width=\"12\" height=\"12\" fill=\"" << colors[mi % 4]
       << "\"/>\n";
    os << "<text x=\"" << fmt(left + 18, 1) << "\" y=\"" << fmt(y, 1)
       << "\" font-size=\"12\" font-family=\"sans-serif\">" << models[mi]
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

// ---- trigger comparison ----

std::vector<CompareRow> compare_stalta(std::span<const TraceEntry> traces,
                                       const StaLtaConfig& base,
                                       std::span<const double> trigger_grid,
                                       const ModelFile* model,
                                       const DetectorConfig& det_config) {
  if (traces.empty()) throw std::runtime_error("compare: no traces");
  std::vector<CompareRow> rows;
  const auto nan = std::numeric_limits<double>::quiet_NaN();

  std::size_t n_noise = 0;
  for (const auto& t : traces)
    if (t.label == Label::non_earthquake) ++n_noise;

  for (const double trig : trigger_grid) {
    StaLtaConfig cfg = base;
    cfg.trigger_on = trig;
    cfg.trigger_off = std::min(base.trigger_off, trig);
    CompareRow row;
    row.algorithm = "sta/lta";
    {
      std::ostringstream os;
      os.precision(4);
      os << "sta=" << cfg.sta_window_s << "s lta=" << cfg.lta_window_s
         << "s trigger_on=" << cfg.trigger_on;
      row.prerequisites = os.str();
    }
    std::size_t correct = 0, false_alarms = 0, detected = 0;
    double alarm_time_sum = 0.0;
    for (const auto& t : traces) {
      const auto result = pick_onset(sta_lta_ratio(t.wave, cfg), cfg);
      const bool triggered = result.onset_index.has_value();
      if (t.label == Label::earthquake) {
        // a pick before the true onset is a premature false detection
        if (triggered && result.onset_time >= t.onset_s) {
          ++correct;
          ++detected;
          alarm_time_sum += result.onset_time - t.onset_s;
        }
      } else {
        if (!triggered)
          ++correct;
        else
          ++false_alarms;
      }
    }
    row.accuracy = double(correct) / double(traces.size());
    row.false_alarm_rate =
        n_noise > 0 ? double(false_alarms) / double(n_noise) : 0.0;
    row.mean_time_to_alarm_s =
        detected > 0 ? alarm_time_sum / double(detected) : nan;
    row.mean_process_ms = nan;
    row.mean_predict_ms = nan;
    rows.push_back(std::move(row));
  }

  if (model) {
    CompareRow row;
    row.algorithm = std::string(nn::to_string(model->spec.kind));
    row.prerequisites = "none";
    std::size_t correct = 0, false_alarms = 0, detected = 0;
    double alarm_time_sum = 0.0, process_sum = 0.0, predict_sum = 0.0;
    std::size_t alarm_count = 0;
    for (const auto& t : traces) {
      Waveform wave = t.wave;
      if (wave.sample_rate != model->feat_config.sample_rate)
        wave = upsample(wave, model->feat_config.sample_rate);
      Detector det(*model, det_config);
      const auto events = det.push_samples(wave.samples);
      const bool triggered = !events.empty();
      for (const auto& ev : events) {
        process_sum += ev.process_ms;
        predict_sum += ev.predict_ms;
        ++alarm_count;
      }
      if (t.label == Label::earthquake) {
        const double first_alarm_s =
            triggered ? double(events.front().trigger_sample_index + 1) /
                            wave.sample_rate
                      : -1.0;
        // an alarm before the true onset is a premature false detection
        if (triggered && first_alarm_s >= t.onset_s) {
          ++correct;
          ++detected;
          alarm_time_sum += first_alarm_s - t.onset_s;
        }
      } else {
        if (!triggered)
          ++correct;
        else
          ++false_alarms;
      }
    }
    row.accuracy = double(correct) / double(traces.size());
    row.false_alarm_rate =
        n_noise > 0 ? double(false_alarms) / double(n_noise) : 0.0;
    row.mean_time_to_alarm_s =
        detected > 0 ? alarm_time_sum / double(detected) : nan;
    row.mean_process_ms = alarm_count > 0 ? process_sum / double(alarm_count) : nan;
    row.mean_predict_ms = alarm_count > 0 ? predict_sum / double(alarm_count) : nan;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string compare_csv(std::span<const CompareRow> rows) {
  std::ostringstream os;
  os.precision(8);
  os << "algorithm,prerequisites,accuracy,false_alarm_rate,"
        "mean_time_to_alarm_s,mean_process_ms,mean_predict_ms\n";
  for (const auto& r : rows) {
    os << r.algorithm << ",\"" << r.prerequisites << "\"," << r.accuracy << ','
       << r.false_alarm_rate << ',' << r.mean_time_to_alarm_s << ','
       << r.mean_process_ms << ',' << r.mean_predict_ms << "\n";
  }
  return os.str();
}

std::vector<std::pair<std::string, double>> parse_onsets_csv(
    std::string_view text) {
  std::vector<std::pair<std::string, double>> out;
  std::size_t pos = 0;
  bool header = true;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    std::string_view line = text.substr(
        pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() : eol + 1;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' '))
      line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;
    if (header) {
      header = false;
      continue;
    }
    const std::size_t comma = line.rfind(',');
    if (comma == std::string_view::npos)
      throw std::runtime_error("onsets csv: malformed row");
    double v = 0;
    const auto num = line.substr(comma + 1);
    auto [p, ec] = std::from_chars(num.data(), num.data() + num.size(), v);
    (void)p;
    if (ec != std::errc{})
      throw std::runtime_error("onsets csv: bad onset value");
    out.emplace_back(std::string(line.substr(0, comma)), v);
  }
  return out;
}

}  // namespace quake
