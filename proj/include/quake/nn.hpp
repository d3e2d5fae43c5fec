#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "quake/mat.hpp"
#include "quake/tensor.hpp"

namespace quake::nn {

enum class ModelKind { cnn, lstm };
enum class LstmReadout { last_timestep, flatten };

std::string_view to_string(ModelKind k);
ModelKind model_kind_from_string(std::string_view s);

// The two fixed classifier architectures over feature matrices.
//
// cnn:  input rows x cols x 1 -> conv 3x3 same/stride 1 with 16, 32, 64, 128
//       filters (ReLU) -> 2x2 maxpool -> dense 128, 64 (ReLU) -> dense 2
//       (softmax)
// lstm: 2 recurrent layers of 128 units -> time-distributed dense
//       64, 32, 16, 8 (ReLU) -> dense 2 (softmax) reading the last timestep
//       (or the flattened sequence)
struct ModelSpec {
  ModelKind kind = ModelKind::cnn;
  int input_rows = 0;
  int input_cols = 0;
  std::vector<int> conv_filters{16, 32, 64, 128};
  std::vector<int> dense_units{128, 64, 2};
  int lstm_layers = 2;
  int lstm_units = 128;
  std::vector<int> td_units{64, 32, 16, 8};
  int n_classes = 2;
  LstmReadout readout = LstmReadout::last_timestep;

  static ModelSpec cnn(int rows, int cols);
  static ModelSpec lstm(int rows, int cols,
                        LstmReadout readout = LstmReadout::last_timestep);
  void validate() const;
  bool operator==(const ModelSpec&) const = default;
};

struct NamedTensor {
  std::string name;
  Tensor t;
  bool operator==(const NamedTensor&) const = default;
};

// Ordered named tensors; the same layout serves parameters, gradients, and
// optimizer moments.
struct ParamSet {
  std::vector<NamedTensor> tensors;

  Tensor& at(std::string_view name);
  const Tensor& at(std::string_view name) const;
  void zero();
  void scale(double s);
  static ParamSet like(const ParamSet& other);  // same names/shapes, zeroed
  bool same_shapes(const ParamSet& other) const;
  bool operator==(const ParamSet&) const = default;
};

// ---- layer primitives (exposed for unit-level oracles) ----

// in: HxWxC, w: 3x3xCxF, b: F -> HxWxF. Same padding, stride 1, no activation.
Tensor conv2d_forward(const Tensor& in, const Tensor& w, const Tensor& b);
// Accumulates into d_w/d_b (and d_in when non-null).
void conv2d_backward(const Tensor& in, const Tensor& w, const Tensor& d_out,
                     Tensor* d_in, Tensor& d_w, Tensor& d_b);

// Non-overlapping 2x2 max; trailing odd row/column dropped. argmax (flat
// input indices) feeds the backward pass.
Tensor maxpool2x2(const Tensor& in, std::vector<std::size_t>* argmax = nullptr);
void maxpool2x2_backward(const std::vector<std::size_t>& argmax,
                         const Tensor& d_out, Tensor& d_in);

// w: out x in
std::vector<double> dense_forward(std::span<const double> x, const Tensor& w,
                                  const Tensor& b);
// Accumulates into d_w/d_b (and d_x when non-null).
void dense_backward(std::span<const double> x, const Tensor& w,
                    std::span<const double> delta, std::span<double> d_x,
                    Tensor& d_w, Tensor& d_b);

void relu_inplace(std::span<double> x);
// d_x masked by post-activation sign: d_x[i] = post[i] > 0 ? d_post[i] : 0
void relu_backward_inplace(std::span<const double> post, std::span<double> d);

std::vector<double> softmax(std::span<const double> x);

struct LstmCache {
  Mat x;  // input sequence copy
  Mat gate_i, gate_f, gate_g, gate_o, cell, tanh_cell, hidden;  // T x H each
};

// seq: T x D. wx: 4H x D, wh: 4H x H, b: 4H; gate row order [i, f, g, o].
// Initial hidden and cell states are zero.
Mat lstm_forward(const Mat& seq, const Tensor& wx, const Tensor& wh,
                 const Tensor& b, LstmCache* cache = nullptr);
// d_hidden: T x H upstream gradient. Accumulates into d_wx/d_wh/d_b (and
// d_seq when non-null).
void lstm_backward(const LstmCache& cache, const Tensor& wx, const Tensor& wh,
                   const Mat& d_hidden, Mat* d_seq, Tensor& d_wx, Tensor& d_wh,
                   Tensor& d_b);

// mean cross-entropy gradient at the logits: probs - onehot(label)
double cross_entropy(std::span<const double> probs, int label);

// ---- model ----

class Model {
 public:
  Model() = default;
  explicit Model(ModelSpec spec);  // zero-initialized parameters
  void init_params(std::uint64_t seed);

  const ModelSpec& spec() const { return spec_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  std::array<double, 2> forward(const Mat& features) const;

  // Mean loss over the batch; grads is zeroed then filled with mean
  // gradients. Throws on non-finite loss. correct_out counts argmax hits.
  double loss_and_backward(std::span<const Mat* const> batch,
                           std::span<const int> labels, ParamSet& grads,
                           int* correct_out = nullptr) const;

 private:
  ModelSpec spec_;
  ParamSet params_;
};

// ---- optimizer ----

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  bool operator==(const AdamConfig&) const = default;
};

struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::vector<Tensor> m;  // first moments, parallel to ParamSet order
  std::vector<Tensor> v;  // second moments

  void init_like(const ParamSet& params);
};

void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state);

// ---- training ----

struct TrainConfig {
  int epochs = 100;
  int batch_size = 32;
  std::uint64_t seed = 0;
  double validation_fraction = 0.0;
  AdamConfig adam;
};

struct EpochStats {
  int epoch = 0;
  double loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;  // NaN when no validation split
};

// Per-column standardization fitted on the training split; stored with the
// model so inference is self-contained.
struct Normalizer {
  std::vector<double> mean;
  std::vector<double> stdev;

  static Normalizer fit(std::span<const Mat> features);
  Mat apply(const Mat& m) const;
  bool operator==(const Normalizer&) const = default;
};

struct TrainResult {
  Model model;
  Normalizer norm;
  std::vector<EpochStats> history;
};

// Deterministic given (spec, feature order, config.seed). Labels are class
// indices: 0 = earthquake, 1 = non_earthquake.
TrainResult train(const ModelSpec& spec, std::span<const Mat> features,
                  std::span<const int> labels, const TrainConfig& config);

std::string history_csv(std::span<const EpochStats> history);

struct Prediction {
  int label = 0;
  double probability = 0.0;
  std::array<double, 2> probs{};
  double predict_ms = 0.0;
};

Prediction predict(const Model& model, const Normalizer& norm,
                   const Mat& features);

}  // namespace quake::nn
