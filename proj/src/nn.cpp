#include "quake/nn.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "quake/kernels.hpp"
#include "quake/rng.hpp"

namespace quake::nn {

std::string_view to_string(ModelKind k) {
  return k == ModelKind::cnn ? "cnn" : "lstm";
}

ModelKind model_kind_from_string(std::string_view s) {
  if (s == "cnn") return ModelKind::cnn;
  if (s == "lstm") return ModelKind::lstm;
  throw std::runtime_error("unknown model kind '" + std::string(s) + "'");
}

ModelSpec ModelSpec::cnn(int rows, int cols) {
  ModelSpec s;
  s.kind = ModelKind::cnn;
  s.input_rows = rows;
  s.input_cols = cols;
  s.validate();
  return s;
}

ModelSpec ModelSpec::lstm(int rows, int cols, LstmReadout readout) {
  ModelSpec s;
  s.kind = ModelKind::lstm;
  s.input_rows = rows;
  s.input_cols = cols;
  s.readout = readout;
  s.validate();
  return s;
}

void ModelSpec::validate() const {
  if (n_classes != 2) throw std::runtime_error("model spec: two classes only");
  if (input_rows < 1 || input_cols < 1)
    throw std::runtime_error("model spec: input shape not set");
  if (kind == ModelKind::cnn) {
    if (conv_filters != std::vector<int>{16, 32, 64, 128})
      throw std::runtime_error("model spec: cnn conv stack must be 16/32/64/128");
    if (dense_units != std::vector<int>{128, 64, 2})
      throw std::runtime_error("model spec: cnn dense stack must be 128/64/2");
    if (input_rows < 2 || input_cols < 2)
      throw std::runtime_error("model spec: cnn input too small for 2x2 maxpool");
  } else {
    if (lstm_layers != 2 || lstm_units != 128)
      throw std::runtime_error("model spec: lstm stack must be 2 layers of 128");
    if (td_units != std::vector<int>{64, 32, 16, 8})
      throw std::runtime_error("model spec: time-distributed stack must be 64/32/16/8");
  }
}

Tensor& ParamSet::at(std::string_view name) {
  for (auto& nt : tensors)
    if (nt.name == name) return nt.t;
  throw std::runtime_error("param set: no tensor named '" + std::string(name) + "'");
}

const Tensor& ParamSet::at(std::string_view name) const {
  for (const auto& nt : tensors)
    if (nt.name == name) return nt.t;
  throw std::runtime_error("param set: no tensor named '" + std::string(name) + "'");
}

void ParamSet::zero() {
  for (auto& nt : tensors) nt.t.zero();
}

void ParamSet::scale(double s) {
  for (auto& nt : tensors)
    for (double& v : nt.t.data) v *= s;
}

ParamSet ParamSet::like(const ParamSet& other) {
  ParamSet p;
  p.tensors.reserve(other.tensors.size());
  for (const auto& nt : other.tensors)
    p.tensors.push_back({nt.name, Tensor(nt.t.shape)});
  return p;
}

bool ParamSet::same_shapes(const ParamSet& other) const {
  if (tensors.size() != other.tensors.size()) return false;
  for (std::size_t i = 0; i < tensors.size(); ++i)
    if (tensors[i].name != other.tensors[i].name ||
        tensors[i].t.shape != other.tensors[i].t.shape)
      return false;
  return true;
}

// ---- layer primitives ----

Tensor conv2d_forward(const Tensor& in, const Tensor& w, const Tensor& b) {
  if (in.shape.size() != 3 || w.shape.size() != 4 || w.shape[0] != 3 ||
      w.shape[1] != 3)
    throw std::runtime_error("conv2d: expected HxWxC input and 3x3xCxF weights");
  const std::size_t h = in.shape[0], wd = in.shape[1], c = in.shape[2];
  const std::size_t f = w.shape[3];
  if (w.shape[2] != c) throw std::runtime_error("conv2d: channel mismatch");
  if (b.size() != f) throw std::runtime_error("conv2d: bias size mismatch");

  Tensor out(std::vector<std::size_t>{h, wd, f});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < wd; ++x) {
      double* orow = out.data.data() + (y * wd + x) * f;
      std::memcpy(orow, b.data.data(), f * sizeof(double));
      for (std::size_t dy = 0; dy < 3; ++dy) {
        const std::size_t iy = y + dy;
        if (iy < 1 || iy > h) continue;  // 1-pixel zero border
        for (std::size_t dx = 0; dx < 3; ++dx) {
          const std::size_t ix = x + dx;
          if (ix < 1 || ix > wd) continue;
          const double* ipx = in.data.data() + ((iy - 1) * wd + (ix - 1)) * c;
          const double* wbase = w.data.data() + (dy * 3 + dx) * c * f;
          for (std::size_t ch = 0; ch < c; ++ch)
            kern::axpy(ipx[ch], wbase + ch * f, orow, f);
        }
      }
    }
  }
  return out;
}

void conv2d_backward(const Tensor& in, const Tensor& w, const Tensor& d_out,
                     Tensor* d_in, Tensor& d_w, Tensor& d_b) {
  const std::size_t h = in.shape[0], wd = in.shape[1], c = in.shape[2];
  const std::size_t f = w.shape[3];
  if (d_out.shape != std::vector<std::size_t>{h, wd, f})
    throw std::runtime_error("conv2d backward: gradient shape mismatch");
  if (d_w.shape != w.shape || d_b.size() != f)
    throw std::runtime_error("conv2d backward: accumulator shape mismatch");
  if (d_in && d_in->shape != in.shape)
    throw std::runtime_error("conv2d backward: d_in shape mismatch");

  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < wd; ++x) {
      const double* drow = d_out.data.data() + (y * wd + x) * f;
      kern::axpy(1.0, drow, d_b.data.data(), f);
      for (std::size_t dy = 0; dy < 3; ++dy) {
        const std::size_t iy = y + dy;
        if (iy < 1 || iy > h) continue;
        for (std::size_t dx = 0; dx < 3; ++dx) {
          const std::size_t ix = x + dx;
          if (ix < 1 || ix > wd) continue;
          const std::size_t px = (iy - 1) * wd + (ix - 1);
          const double* ipx = in.data.data() + px * c;
          const double* wbase = w.data.data() + (dy * 3 + dx) * c * f;
          double* dwbase = d_w.data.data() + (dy * 3 + dx) * c * f;
          for (std::size_t ch = 0; ch < c; ++ch)
            kern::axpy(ipx[ch], drow, dwbase + ch * f, f);
          if (d_in) {
            double* dipx = d_in->data.data() + px * c;
            for (std::size_t ch = 0; ch < c; ++ch)
              dipx[ch] += kern::dot(wbase + ch * f, drow, f);
          }
        }
      }
    }
  }
}

Tensor maxpool2x2(const Tensor& in, std::vector<std::size_t>* argmax) {
  if (in.shape.size() != 3) throw std::runtime_error("maxpool: expected HxWxC");
  const std::size_t h = in.shape[0], w = in.shape[1], c = in.shape[2];
  if (h < 2 || w < 2) throw std::runtime_error("maxpool: input smaller than 2x2");
  const std::size_t oh = h / 2, ow = w / 2;
  Tensor out(std::vector<std::size_t>{oh, ow, c});
  if (argmax) argmax->assign(out.size(), 0);
  for (std::size_t y = 0; y < oh; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        std::size_t best = (2 * y * w + 2 * x) * c + ch;
        double best_v = in.data[best];
        const std::size_t cands[3] = {(2 * y * w + 2 * x + 1) * c + ch,
                                      ((2 * y + 1) * w + 2 * x) * c + ch,
                                      ((2 * y + 1) * w + 2 * x + 1) * c + ch};
        for (std::size_t idx : cands) {
          if (in.data[idx] > best_v) {
            best_v = in.data[idx];
            best = idx;
          }
        }
        const std::size_t o = (y * ow + x) * c + ch;
        out.data[o] = best_v;
        if (argmax) (*argmax)[o] = best;
      }
    }
  }
  return out;
}

void maxpool2x2_backward(const std::vector<std::size_t>& argmax,
                         const Tensor& d_out, Tensor& d_in) {
  if (argmax.size() != d_out.size())
    throw std::runtime_error("maxpool backward: argmax size mismatch");
  for (std::size_t o = 0; o < argmax.size(); ++o)
    d_in.data[argmax[o]] += d_out.data[o];
}

std::vector<double> dense_forward(std::span<const double> x, const Tensor& w,
                                  const Tensor& b) {
  if (w.shape.size() != 2 || w.shape[1] != x.size() || b.size() != w.shape[0])
    throw std::runtime_error("dense: shape mismatch");
  std::vector<double> y(w.shape[0]);
  kern::matvec(w.data.data(), w.shape[0], w.shape[1], x.data(), y.data());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += b.data[i];
  return y;
}

void dense_backward(std::span<const double> x, const Tensor& w,
                    std::span<const double> delta, std::span<double> d_x,
                    Tensor& d_w, Tensor& d_b) {
  const std::size_t out = w.shape[0], in = w.shape[1];
  if (delta.size() != out || x.size() != in)
    throw std::runtime_error("dense backward: shape mismatch");
  kern::axpy(1.0, delta.data(), d_b.data.data(), out);
  for (std::size_t r = 0; r < out; ++r)
    kern::axpy(delta[r], x.data(), d_w.data.data() + r * in, in);
  if (!d_x.empty())
    kern::matvec_t_acc(w.data.data(), out, in, delta.data(), d_x.data());
}

void relu_inplace(std::span<double> x) {
  for (double& v : x) v = v > 0.0 ? v : 0.0;
}

void relu_backward_inplace(std::span<const double> post, std::span<double> d) {
  for (std::size_t i = 0; i < d.size(); ++i)
    if (post[i] <= 0.0) d[i] = 0.0;
}

std::vector<double> softmax(std::span<const double> x) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : x) mx = std::max(mx, v);
  std::vector<double> y(x.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = std::exp(x[i] - mx);
    sum += y[i];
  }
  for (double& v : y) v /= sum;
  return y;
}

double cross_entropy(std::span<const double> probs, int label) {
  if (label < 0 || std::size_t(label) >= probs.size())
    throw std::runtime_error("cross_entropy: label out of range");
  return -std::log(std::max(probs[std::size_t(label)], 1e-300));
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Mat lstm_forward(const Mat& seq, const Tensor& wx, const Tensor& wh,
                 const Tensor& b, LstmCache* cache) {
  const std::size_t t_len = seq.rows, d = seq.cols;
  if (wx.shape.size() != 2 || wx.shape[1] != d)
    throw std::runtime_error("lstm: input weight shape mismatch");
  const std::size_t hh = wx.shape[0] / 4;
  if (wx.shape[0] != 4 * hh || wh.shape != std::vector<std::size_t>{4 * hh, hh} ||
      b.size() != 4 * hh)
    throw std::runtime_error("lstm: recurrent weight shape mismatch");

  Mat hidden(t_len, hh);
  LstmCache local;
  LstmCache& cc = cache ? *cache : local;
  cc.x = seq;
  cc.gate_i = Mat(t_len, hh);
  cc.gate_f = Mat(t_len, hh);
  cc.gate_g = Mat(t_len, hh);
  cc.gate_o = Mat(t_len, hh);
  cc.cell = Mat(t_len, hh);
  cc.tanh_cell = Mat(t_len, hh);
  cc.hidden = Mat(t_len, hh);

  std::vector<double> z(4 * hh);
  std::vector<double> h_prev(hh, 0.0), c_prev(hh, 0.0);
  for (std::size_t t = 0; t < t_len; ++t) {
    kern::matvec(wx.data.data(), 4 * hh, d, seq.row(t), z.data());
    kern::matvec_acc(wh.data.data(), 4 * hh, hh, h_prev.data(), z.data());
    for (std::size_t j = 0; j < 4 * hh; ++j) z[j] += b.data[j];
    for (std::size_t j = 0; j < hh; ++j) {
      const double gi = sigmoid(z[j]);
      const double gf = sigmoid(z[hh + j]);
      const double gg = std::tanh(z[2 * hh + j]);
      const double go = sigmoid(z[3 * hh + j]);
      const double cell = gf * c_prev[j] + gi * gg;
      const double tc = std::tanh(cell);
      const double hv = go * tc;
      cc.gate_i.at(t, j) = gi;
      cc.gate_f.at(t, j) = gf;
      cc.gate_g.at(t, j) = gg;
      cc.gate_o.at(t, j) = go;
      cc.cell.at(t, j) = cell;
      cc.tanh_cell.at(t, j) = tc;
      cc.hidden.at(t, j) = hv;
      hidden.at(t, j) = hv;
    }
    h_prev.assign(cc.hidden.row(t), cc.hidden.row(t) + hh);
    c_prev.assign(cc.cell.row(t), cc.cell.row(t) + hh);
  }
  return hidden;
}

void lstm_backward(const LstmCache& cache, const Tensor& wx, const Tensor& wh,
                   const Mat& d_hidden, Mat* d_seq, Tensor& d_wx, Tensor& d_wh,
                   Tensor& d_b) {
  const std::size_t t_len = cache.hidden.rows, hh = cache.hidden.cols;
  const std::size_t d = cache.x.cols;
  if (d_hidden.rows != t_len || d_hidden.cols != hh)
    throw std::runtime_error("lstm backward: gradient shape mismatch");

  std::vector<double> dh_carry(hh, 0.0), dc_carry(hh, 0.0);
  std::vector<double> dz(4 * hh);
  for (std::size_t ti = t_len; ti-- > 0;) {
    for (std::size_t j = 0; j < hh; ++j) {
      const double dh = d_hidden.at(ti, j) + dh_carry[j];
      const double gi = cache.gate_i.at(ti, j);
      const double gf = cache.gate_f.at(ti, j);
      const double gg = cache.gate_g.at(ti, j);
      const double go = cache.gate_o.at(ti, j);
      const double tc = cache.tanh_cell.at(ti, j);
      const double c_prev = ti > 0 ? cache.cell.at(ti - 1, j) : 0.0;

      const double d_go = dh * tc;
      const double dc = dc_carry[j] + dh * go * (1.0 - tc * tc);
      const double d_gi = dc * gg;
      const double d_gg = dc * gi;
      const double d_gf = dc * c_prev;
      dc_carry[j] = dc * gf;

      dz[j] = d_gi * gi * (1.0 - gi);
      dz[hh + j] = d_gf * gf * (1.0 - gf);
      dz[2 * hh + j] = d_gg * (1.0 - gg * gg);
      dz[3 * hh + j] = d_go * go * (1.0 - go);
    }
    kern::axpy(1.0, dz.data(), d_b.data.data(), 4 * hh);
    for (std::size_t r = 0; r < 4 * hh; ++r)
      kern::axpy(dz[r], cache.x.row(ti), d_wx.data.data() + r * d, d);
    if (ti > 0) {
      const double* h_prev = cache.hidden.row(ti - 1);
      for (std::size_t r = 0; r < 4 * hh; ++r)
        kern::axpy(dz[r], h_prev, d_wh.data.data() + r * hh, hh);
    }
    if (d_seq)
      kern::matvec_t_acc(wx.data.data(), 4 * hh, d, dz.data(), d_seq->row(ti));
    std::fill(dh_carry.begin(), dh_carry.end(), 0.0);
    kern::matvec_t_acc(wh.data.data(), 4 * hh, hh, dz.data(), dh_carry.data());
  }
}

// ---- model ----

namespace {

std::size_t cnn_flat_size(const ModelSpec& s) {
  return std::size_t(s.input_rows / 2) * std::size_t(s.input_cols / 2) *
         std::size_t(s.conv_filters.back());
}

ParamSet build_params(const ModelSpec& s) {
  using Sz = std::vector<std::size_t>;
  ParamSet p;
  auto add = [&p](std::string name, Sz shape) {
    p.tensors.push_back({std::move(name), Tensor(std::move(shape))});
  };
  if (s.kind == ModelKind::cnn) {
    std::size_t c_in = 1;
    for (std::size_t k = 0; k < s.conv_filters.size(); ++k) {
      const auto f = std::size_t(s.conv_filters[k]);
      add("conv" + std::to_string(k) + ".w", Sz{3, 3, c_in, f});
      add("conv" + std::to_string(k) + ".b", Sz{f});
      c_in = f;
    }
    std::size_t in = cnn_flat_size(s);
    for (std::size_t k = 0; k < s.dense_units.size(); ++k) {
      const auto u = std::size_t(s.dense_units[k]);
      add("dense" + std::to_string(k) + ".w", Sz{u, in});
      add("dense" + std::to_string(k) + ".b", Sz{u});
      in = u;
    }
  } else {
    std::size_t in = std::size_t(s.input_cols);
    const auto hh = std::size_t(s.lstm_units);
    for (int k = 0; k < s.lstm_layers; ++k) {
      add("lstm" + std::to_string(k) + ".wx", Sz{4 * hh, in});
      add("lstm" + std::to_string(k) + ".wh", Sz{4 * hh, hh});
      add("lstm" + std::to_string(k) + ".b", Sz{4 * hh});
      in = hh;
    }
    for (std::size_t k = 0; k < s.td_units.size(); ++k) {
      const auto u = std::size_t(s.td_units[k]);
      add("td" + std::to_string(k) + ".w", Sz{u, in});
      add("td" + std::to_string(k) + ".b", Sz{u});
      in = u;
    }
    const std::size_t head_in = s.readout == LstmReadout::flatten
                                    ? in * std::size_t(s.input_rows)
                                    : in;
    add("out.w", Sz{std::size_t(s.n_classes), head_in});
    add("out.b", Sz{std::size_t(s.n_classes)});
  }
  return p;
}

struct CnnCache {
  std::vector<const Tensor*> conv_in;  // borrowed: image + previous posts
  Tensor image;
  std::vector<Tensor> conv_post;  // post-relu
  Tensor pool_out;
  std::vector<std::size_t> pool_argmax;
  std::vector<std::vector<double>> fc_in;
  std::vector<std::vector<double>> fc_post;  // relu for hidden, logits last
  std::array<double, 2> probs{};
};

struct LstmModelCache {
  std::vector<LstmCache> lstm;
  std::vector<Mat> td_in;
  std::vector<Mat> td_post;
  std::vector<double> head_in;
  std::array<double, 2> probs{};
};

Tensor image_from(const Mat& feat) {
  Tensor t(std::vector<std::size_t>{feat.rows, feat.cols, 1});
  std::copy(feat.v.begin(), feat.v.end(), t.data.begin());
  return t;
}

std::array<double, 2> cnn_run(const ModelSpec& spec, const ParamSet& p,
                              const Mat& feat, CnnCache* cache) {
  CnnCache local;
  CnnCache& cc = cache ? *cache : local;
  cc.image = image_from(feat);
  cc.conv_in.clear();
  cc.conv_post.clear();
  cc.conv_post.reserve(spec.conv_filters.size());  // keep borrowed pointers stable
  const Tensor* cur = &cc.image;
  for (std::size_t k = 0; k < spec.conv_filters.size(); ++k) {
    cc.conv_in.push_back(cur);
    Tensor out = conv2d_forward(*cur, p.at("conv" + std::to_string(k) + ".w"),
                                p.at("conv" + std::to_string(k) + ".b"));
    relu_inplace(out.data);
    cc.conv_post.push_back(std::move(out));
    cur = &cc.conv_post.back();
  }
  cc.pool_out = maxpool2x2(*cur, &cc.pool_argmax);

  cc.fc_in.clear();
  cc.fc_post.clear();
  std::vector<double> vec(cc.pool_out.data);
  const std::size_t n_dense = spec.dense_units.size();
  for (std::size_t k = 0; k < n_dense; ++k) {
    cc.fc_in.push_back(vec);
    vec = dense_forward(vec, p.at("dense" + std::to_string(k) + ".w"),
                        p.at("dense" + std::to_string(k) + ".b"));
    if (k + 1 < n_dense) relu_inplace(vec);
    cc.fc_post.push_back(vec);
  }
  const auto probs = softmax(vec);
  cc.probs = {probs[0], probs[1]};
  return cc.probs;
}

void cnn_grad(const ModelSpec& spec, const ParamSet& p, const CnnCache& cc,
              std::array<double, 2> d_logits, ParamSet& g) {
  std::vector<double> delta(d_logits.begin(), d_logits.end());
  const std::size_t n_dense = spec.dense_units.size();
  std::vector<double> d_x;
  for (std::size_t k = n_dense; k-- > 0;) {
    const auto& w = p.at("dense" + std::to_string(k) + ".w");
    d_x.assign(w.shape[1], 0.0);
    dense_backward(cc.fc_in[k], w, delta, d_x,
                   g.at("dense" + std::to_string(k) + ".w"),
                   g.at("dense" + std::to_string(k) + ".b"));
    if (k > 0) relu_backward_inplace(cc.fc_post[k - 1], d_x);
    delta = d_x;
  }

  Tensor d_pool(cc.pool_out.shape);
  std::copy(delta.begin(), delta.end(), d_pool.data.begin());
  Tensor d_cur(cc.conv_post.back().shape);
  maxpool2x2_backward(cc.pool_argmax, d_pool, d_cur);

  for (std::size_t k = spec.conv_filters.size(); k-- > 0;) {
    relu_backward_inplace(cc.conv_post[k].data, d_cur.data);
    Tensor d_prev;
    Tensor* d_prev_ptr = nullptr;
    if (k > 0) {
      d_prev = Tensor(cc.conv_in[k]->shape);
      d_prev_ptr = &d_prev;
    }
    conv2d_backward(*cc.conv_in[k], p.at("conv" + std::to_string(k) + ".w"),
                    d_cur, d_prev_ptr, g.at("conv" + std::to_string(k) + ".w"),
                    g.at("conv" + std::to_string(k) + ".b"));
    if (k > 0) d_cur = std::move(d_prev);
  }
}

std::array<double, 2> lstm_run(const ModelSpec& spec, const ParamSet& p,
                               const Mat& feat, LstmModelCache* cache) {
  LstmModelCache local;
  LstmModelCache& cc = cache ? *cache : local;
  cc.lstm.assign(std::size_t(spec.lstm_layers), LstmCache{});
  Mat cur = feat;
  for (int k = 0; k < spec.lstm_layers; ++k) {
    cur = lstm_forward(cur, p.at("lstm" + std::to_string(k) + ".wx"),
                       p.at("lstm" + std::to_string(k) + ".wh"),
                       p.at("lstm" + std::to_string(k) + ".b"),
                       &cc.lstm[std::size_t(k)]);
  }
  cc.td_in.clear();
  cc.td_post.clear();
  for (std::size_t k = 0; k < spec.td_units.size(); ++k) {
    const auto& w = p.at("td" + std::to_string(k) + ".w");
    const auto& b = p.at("td" + std::to_string(k) + ".b");
    cc.td_in.push_back(cur);
    Mat out(cur.rows, w.shape[0]);
    for (std::size_t t = 0; t < cur.rows; ++t) {
      auto y = dense_forward(std::span<const double>(cur.row(t), cur.cols), w, b);
      relu_inplace(y);
      std::copy(y.begin(), y.end(), out.row(t));
    }
    cur = std::move(out);
    cc.td_post.push_back(cur);
  }
  if (spec.readout == LstmReadout::flatten)
    cc.head_in = cur.v;
  else
    cc.head_in.assign(cur.row(cur.rows - 1), cur.row(cur.rows - 1) + cur.cols);

  auto logits = dense_forward(cc.head_in, p.at("out.w"), p.at("out.b"));
  const auto probs = softmax(logits);
  cc.probs = {probs[0], probs[1]};
  return cc.probs;
}

void lstm_grad(const ModelSpec& spec, const ParamSet& p,
               const LstmModelCache& cc, std::array<double, 2> d_logits,
               ParamSet& g) {
  std::vector<double> d_head(cc.head_in.size(), 0.0);
  dense_backward(cc.head_in, p.at("out.w"),
                 std::span<const double>(d_logits.data(), 2), d_head,
                 g.at("out.w"), g.at("out.b"));

  const std::size_t t_len = cc.td_post.back().rows;
  const std::size_t last_u = cc.td_post.back().cols;
  Mat d_td(t_len, last_u);
  if (spec.readout == LstmReadout::flatten) {
    std::copy(d_head.begin(), d_head.end(), d_td.v.begin());
  } else {
    std::copy(d_head.begin(), d_head.end(), d_td.row(t_len - 1));
  }

  for (std::size_t k = spec.td_units.size(); k-- > 0;) {
    const auto& w = p.at("td" + std::to_string(k) + ".w");
    Mat d_lower(t_len, w.shape[1]);
    for (std::size_t t = 0; t < t_len; ++t) {
      relu_backward_inplace(
          std::span<const double>(cc.td_post[k].row(t), cc.td_post[k].cols),
          std::span<double>(d_td.row(t), d_td.cols));
      dense_backward(
          std::span<const double>(cc.td_in[k].row(t), cc.td_in[k].cols), w,
          std::span<const double>(d_td.row(t), d_td.cols),
          std::span<double>(d_lower.row(t), d_lower.cols),
          g.at("td" + std::to_string(k) + ".w"),
          g.at("td" + std::to_string(k) + ".b"));
    }
    d_td = std::move(d_lower);
  }

  Mat d_h = std::move(d_td);  // gradient w.r.t. last lstm layer's hidden seq
  for (int k = spec.lstm_layers; k-- > 0;) {
    Mat d_below;
    Mat* d_below_ptr = nullptr;
    if (k > 0) {
      d_below = Mat(cc.lstm[std::size_t(k)].x.rows, cc.lstm[std::size_t(k)].x.cols);
      d_below_ptr = &d_below;
    }
    lstm_backward(cc.lstm[std::size_t(k)],
                  p.at("lstm" + std::to_string(k) + ".wx"),
                  p.at("lstm" + std::to_string(k) + ".wh"), d_h, d_below_ptr,
                  g.at("lstm" + std::to_string(k) + ".wx"),
                  g.at("lstm" + std::to_string(k) + ".wh"),
                  g.at("lstm" + std::to_string(k) + ".b"));
    if (k > 0) d_h = std::move(d_below);
  }
}

}  // namespace

Model::Model(ModelSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  params_ = build_params(spec_);
}

void Model::init_params(std::uint64_t seed) {
  Rng rng(Rng::mix(seed, 0x1f123bb5));
  auto fill_uniform = [&rng](Tensor& t, double limit) {
    for (double& v : t.data) v = rng.uniform(-limit, limit);
  };
  for (auto& nt : params_.tensors) {
    const auto& name = nt.name;
    Tensor& t = nt.t;
    const bool is_weight = name.ends_with(".w") || name.ends_with(".wx") ||
                           name.ends_with(".wh");
    if (!is_weight) {
      t.zero();
      // forget gate bias starts open
      if (name.starts_with("lstm") && name.ends_with(".b")) {
        const std::size_t hh = t.size() / 4;
        for (std::size_t j = 0; j < hh; ++j) t.data[hh + j] = 1.0;
      }
      continue;
    }
    const bool softmax_layer =
        name == "out.w" ||
        (spec_.kind == ModelKind::cnn &&
         name == "dense" + std::to_string(spec_.dense_units.size() - 1) + ".w");
    if (name.starts_with("conv")) {
      const double fan_in = double(3 * 3 * t.shape[2]);
      fill_uniform(t, std::sqrt(6.0 / fan_in));
    } else if (name.starts_with("lstm")) {
      const double fan_in = double(t.shape[1]);
      const double fan_out = double(t.shape[0]);
      fill_uniform(t, std::sqrt(6.0 / (fan_in + fan_out)));
    } else if (softmax_layer) {
      fill_uniform(t, std::sqrt(6.0 / double(t.shape[0] + t.shape[1])));
    } else {
      fill_uniform(t, std::sqrt(6.0 / double(t.shape[1])));  // He, ReLU layers
    }
  }
}

std::array<double, 2> Model::forward(const Mat& features) const {
  if (features.rows != std::size_t(spec_.input_rows) ||
      features.cols != std::size_t(spec_.input_cols))
    throw std::runtime_error(
        "forward: feature shape " + std::to_string(features.rows) + "x" +
        std::to_string(features.cols) + " does not match model input " +
        std::to_string(spec_.input_rows) + "x" + std::to_string(spec_.input_cols));
  if (spec_.kind == ModelKind::cnn) return cnn_run(spec_, params_, features, nullptr);
  return lstm_run(spec_, params_, features, nullptr);
}

double Model::loss_and_backward(std::span<const Mat* const> batch,
                                std::span<const int> labels, ParamSet& grads,
                                int* correct_out) const {
  if (batch.empty() || batch.size() != labels.size())
    throw std::runtime_error("loss_and_backward: empty or mismatched batch");
  if (!grads.same_shapes(params_)) grads = ParamSet::like(params_);
  grads.zero();

  double loss_sum = 0.0;
  int correct = 0;
  for (std::size_t s = 0; s < batch.size(); ++s) {
    const int label = labels[s];
    if (label != 0 && label != 1)
      throw std::runtime_error("loss_and_backward: label outside {0,1}");
    std::array<double, 2> probs;
    if (spec_.kind == ModelKind::cnn) {
      CnnCache cache;
      probs = cnn_run(spec_, params_, *batch[s], &cache);
      std::array<double, 2> d_logits = probs;
      d_logits[std::size_t(label)] -= 1.0;
      cnn_grad(spec_, params_, cache, d_logits, grads);
    } else {
      LstmModelCache cache;
      probs = lstm_run(spec_, params_, *batch[s], &cache);
      std::array<double, 2> d_logits = probs;
      d_logits[std::size_t(label)] -= 1.0;
      lstm_grad(spec_, params_, cache, d_logits, grads);
    }
    loss_sum += cross_entropy(probs, label);
    if ((probs[0] >= probs[1] ? 0 : 1) == label) ++correct;
  }
  const double mean_loss = loss_sum / double(batch.size());
  if (!std::isfinite(mean_loss))
    throw std::runtime_error("training diverged: non-finite loss");
  grads.scale(1.0 / double(batch.size()));
  if (correct_out) *correct_out = correct;
  return mean_loss;
}

// ---- optimizer ----

void AdamState::init_like(const ParamSet& params) {
  step = 0;
  m.clear();
  v.clear();
  for (const auto& nt : params.tensors) {
    m.emplace_back(nt.t.shape);
    v.emplace_back(nt.t.shape);
  }
}

void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state) {
  if (!params.same_shapes(grads))
    throw std::runtime_error("adam: gradient shapes do not match parameters");
  if (state.m.size() != params.tensors.size()) state.init_like(params);
  ++state.step;
  const auto& c = state.config;
  const double bc1 = 1.0 - std::pow(c.beta1, double(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, double(state.step));
  for (std::size_t i = 0; i < params.tensors.size(); ++i) {
    double* p = params.tensors[i].t.data.data();
    const double* g = grads.tensors[i].t.data.data();
    double* m = state.m[i].data.data();
    double* v = state.v[i].data.data();
    const std::size_t n = params.tensors[i].t.size();
    for (std::size_t j = 0; j < n; ++j) {
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      p[j] -= c.lr * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
  }
}

// ---- training ----

Normalizer Normalizer::fit(std::span<const Mat> features) {
  if (features.empty()) throw std::runtime_error("normalizer: no features");
  const std::size_t cols = features.front().cols;
  std::vector<double> sum(cols, 0.0), sum_sq(cols, 0.0);
  std::size_t n_rows = 0;
  for (const auto& f : features) {
    if (f.cols != cols) throw std::runtime_error("normalizer: ragged features");
    for (std::size_t r = 0; r < f.rows; ++r) {
      const double* row = f.row(r);
      for (std::size_t c = 0; c < cols; ++c) {
        sum[c] += row[c];
        sum_sq[c] += row[c] * row[c];
      }
    }
    n_rows += f.rows;
  }
  Normalizer nz;
  nz.mean.resize(cols);
  nz.stdev.resize(cols);
  for (std::size_t c = 0; c < cols; ++c) {
    nz.mean[c] = sum[c] / double(n_rows);
    const double var = std::max(0.0, sum_sq[c] / double(n_rows) - nz.mean[c] * nz.mean[c]);
    const double sd = std::sqrt(var);
    nz.stdev[c] = sd > 1e-12 ? sd : 1.0;
  }
  return nz;
}

Mat Normalizer::apply(const Mat& m) const {
  if (m.cols != mean.size())
    throw std::runtime_error("normalizer: column count mismatch");
  Mat out = m;
  for (std::size_t r = 0; r < out.rows; ++r) {
    double* row = out.row(r);
    for (std::size_t c = 0; c < out.cols; ++c)
      row[c] = (row[c] - mean[c]) / stdev[c];
  }
  return out;
}

TrainResult train(const ModelSpec& spec, std::span<const Mat> features,
                  std::span<const int> labels, const TrainConfig& config) {
  spec.validate();
  if (features.empty() || features.size() != labels.size())
    throw std::runtime_error("train: empty or mismatched dataset");
  if (config.epochs < 1 || config.batch_size < 1)
    throw std::runtime_error("train: epochs and batch_size must be >= 1");
  for (const auto& f : features)
    if (f.rows != std::size_t(spec.input_rows) ||
        f.cols != std::size_t(spec.input_cols))
      throw std::runtime_error("train: inconsistent feature shapes");

  Rng rng(Rng::mix(config.seed, 0x7a51db91));
  std::vector<std::size_t> order(features.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  shuffle(order, rng);

  std::size_t n_val = 0;
  if (config.validation_fraction > 0.0)
    n_val = std::size_t(std::llround(config.validation_fraction * double(features.size())));
  if (n_val >= features.size()) throw std::runtime_error("train: validation split too large");
  std::vector<std::size_t> train_idx(order.begin(), order.end() - long(n_val));
  std::vector<std::size_t> val_idx(order.end() - long(n_val), order.end());

  std::vector<Mat> train_raw;
  train_raw.reserve(train_idx.size());
  for (std::size_t i : train_idx) train_raw.push_back(features[i]);
  Normalizer norm = Normalizer::fit(train_raw);

  std::vector<Mat> std_feats;
  std_feats.reserve(features.size());
  for (const auto& f : features) std_feats.push_back(norm.apply(f));

  TrainResult res;
  res.norm = std::move(norm);
  res.model = Model(spec);
  res.model.init_params(config.seed);

  AdamState adam;
  adam.config = config.adam;
  adam.init_like(res.model.params());
  ParamSet grads = ParamSet::like(res.model.params());

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle(train_idx, rng);
    double loss_sum = 0.0;
    int correct = 0;
    for (std::size_t start = 0; start < train_idx.size();
         start += std::size_t(config.batch_size)) {
      const std::size_t end =
          std::min(train_idx.size(), start + std::size_t(config.batch_size));
      std::vector<const Mat*> batch;
      std::vector<int> batch_labels;
      batch.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(&std_feats[train_idx[i]]);
        batch_labels.push_back(labels[train_idx[i]]);
      }
      int batch_correct = 0;
      const double loss = res.model.loss_and_backward(batch, batch_labels,
                                                      grads, &batch_correct);
      loss_sum += loss * double(batch.size());
      correct += batch_correct;
      adam_step(res.model.params(), grads, adam);
    }

    EpochStats st;
    st.epoch = epoch + 1;
    st.loss = loss_sum / double(train_idx.size());
    st.train_acc = double(correct) / double(train_idx.size());
    st.val_acc = std::numeric_limits<double>::quiet_NaN();
    if (!val_idx.empty()) {
      int val_correct = 0;
      for (std::size_t i : val_idx) {
        const auto probs = res.model.forward(std_feats[i]);
        if ((probs[0] >= probs[1] ? 0 : 1) == labels[i]) ++val_correct;
      }
      st.val_acc = double(val_correct) / double(val_idx.size());
    }
    res.history.push_back(st);
  }
  return res;
}

std::string history_csv(std::span<const EpochStats> history) {
  std::ostringstream os;
  os.precision(10);
  os << "epoch,loss,train_acc,val_acc\n";
  for (const auto& st : history) {
    os << st.epoch << ',' << st.loss << ',' << st.train_acc << ',';
    if (std::isnan(st.val_acc))
      os << "";
    else
      os << st.val_acc;
    os << "\n";
  }
  return os.str();
}

Prediction predict(const Model& model, const Normalizer& norm,
                   const Mat& features) {
  const auto t0 = std::chrono::steady_clock::now();
  const Mat standardized = norm.apply(features);
  const auto probs = model.forward(standardized);
  const auto t1 = std::chrono::steady_clock::now();
  Prediction p;
  p.probs = probs;
  p.label = probs[0] >= probs[1] ? 0 : 1;
  p.probability = probs[std::size_t(p.label)];
  p.predict_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  return p;
}

}  // namespace quake::nn
