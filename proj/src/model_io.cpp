#include "quake/model_io.hpp"

#include <bit>
#include <cstring>
#include <stdexcept>

#include "quake/crc32.hpp"
#include "quake/waveform.hpp"

namespace quake {

namespace {

constexpr std::uint32_t kVersion = 1;

struct Writer {
  std::vector<std::uint8_t> out;

  void u8(std::uint8_t v) { out.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(std::uint8_t(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(std::uint8_t(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(std::uint32_t(s.size()));
    out.insert(out.end(), s.begin(), s.end());
  }
  void vec_i32(const std::vector<int>& v) {
    u32(std::uint32_t(v.size()));
    for (int x : v) u32(std::uint32_t(x));
  }
  void vec_f64(const std::vector<double>& v) {
    u64(v.size());
    for (double x : v) f64(x);
  }
};

struct Reader {
  std::span<const std::uint8_t> in;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > in.size()) throw std::runtime_error("model file: truncated");
  }
  std::uint8_t u8() {
    need(1);
    return in[pos++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(in[pos + std::size_t(i)]) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(in[pos + std::size_t(i)]) << (8 * i);
    pos += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(in.data() + pos), n);
    pos += n;
    return s;
  }
  std::vector<int> vec_i32() {
    const std::uint32_t n = u32();
    std::vector<int> v(n);
    for (auto& x : v) x = int(u32());
    return v;
  }
  std::vector<double> vec_f64() {
    const std::uint64_t n = u64();
    need(std::size_t(n) * 8);
    std::vector<double> v(static_cast<std::size_t>(n));
    for (auto& x : v) x = f64();
    return v;
  }
};

}  // namespace

std::vector<std::uint8_t> save_model(const ModelFile& m) {
  Writer w;
  w.out.insert(w.out.end(), {'Q', 'F', 'M', '1'});
  w.u32(kVersion);

  w.u8(m.spec.kind == nn::ModelKind::cnn ? 0 : 1);
  w.u8(m.spec.readout == nn::LstmReadout::last_timestep ? 0 : 1);
  w.u32(std::uint32_t(m.spec.input_rows));
  w.u32(std::uint32_t(m.spec.input_cols));
  w.vec_i32(m.spec.conv_filters);
  w.vec_i32(m.spec.dense_units);
  w.u32(std::uint32_t(m.spec.lstm_layers));
  w.u32(std::uint32_t(m.spec.lstm_units));
  w.vec_i32(m.spec.td_units);
  w.u32(std::uint32_t(m.spec.n_classes));

  w.f64(m.feat_config.alpha);
  w.f64(m.feat_config.frame_len_ms);
  w.f64(m.feat_config.stride_ms);
  w.u32(std::uint32_t(m.feat_config.nfft));
  w.u32(std::uint32_t(m.feat_config.n_filters));
  w.u32(std::uint32_t(m.feat_config.n_ceps));
  w.u32(std::uint32_t(m.feat_config.sample_rate));
  w.f64(m.feat_config.log_floor);
  w.u8(m.feat_kind == FeatureKind::mfcc ? 0 : 1);
  w.f64(m.window_s);

  w.vec_f64(m.norm.mean);
  w.vec_f64(m.norm.stdev);

  w.u32(std::uint32_t(m.params.tensors.size()));
  for (const auto& nt : m.params.tensors) {
    w.str(nt.name);
    w.u32(std::uint32_t(nt.t.shape.size()));
    for (std::size_t d : nt.t.shape) w.u64(d);
    for (double v : nt.t.data) w.f64(v);
  }

  w.u32(crc32_ieee(w.out));
  return w.out;
}

ModelFile load_model(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12) throw std::runtime_error("model file: truncated");
  if (std::memcmp(bytes.data(), "QFM1", 4) != 0)
    throw std::runtime_error("model file: bad magic (not a QFM1 container)");
  const std::uint32_t stored_crc = std::uint32_t(bytes[bytes.size() - 4]) |
                                   std::uint32_t(bytes[bytes.size() - 3]) << 8 |
                                   std::uint32_t(bytes[bytes.size() - 2]) << 16 |
                                   std::uint32_t(bytes[bytes.size() - 1]) << 24;
  if (crc32_ieee(bytes.subspan(0, bytes.size() - 4)) != stored_crc)
    throw std::runtime_error("model file: CRC mismatch (corrupt file)");

  Reader r{bytes.subspan(4, bytes.size() - 8), 0};
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    throw std::runtime_error("model file: unsupported version " +
                             std::to_string(version));

  ModelFile m;
  m.spec.kind = r.u8() == 0 ? nn::ModelKind::cnn : nn::ModelKind::lstm;
  m.spec.readout =
      r.u8() == 0 ? nn::LstmReadout::last_timestep : nn::LstmReadout::flatten;
  m.spec.input_rows = int(r.u32());
  m.spec.input_cols = int(r.u32());
  m.spec.conv_filters = r.vec_i32();
  m.spec.dense_units = r.vec_i32();
  m.spec.lstm_layers = int(r.u32());
  m.spec.lstm_units = int(r.u32());
  m.spec.td_units = r.vec_i32();
  m.spec.n_classes = int(r.u32());

  m.feat_config.alpha = r.f64();
  m.feat_config.frame_len_ms = r.f64();
  m.feat_config.stride_ms = r.f64();
  m.feat_config.nfft = int(r.u32());
  m.feat_config.n_filters = int(r.u32());
  m.feat_config.n_ceps = int(r.u32());
  m.feat_config.sample_rate = int(r.u32());
  m.feat_config.log_floor = r.f64();
  m.feat_kind = r.u8() == 0 ? FeatureKind::mfcc : FeatureKind::log_filterbank;
  m.window_s = r.f64();

  m.norm.mean = r.vec_f64();
  m.norm.stdev = r.vec_f64();

  m.spec.validate();

  const std::uint32_t n_tensors = r.u32();
  // rebuild the expected layout and check the stored tensors against it
  nn::Model expected(m.spec);
  if (n_tensors != expected.params().tensors.size())
    throw std::runtime_error("model file: tensor count does not match spec");
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    nn::NamedTensor nt;
    nt.name = r.str();
    const std::uint32_t ndim = r.u32();
    std::vector<std::size_t> shape(ndim);
    for (auto& d : shape) d = std::size_t(r.u64());
    nt.t = Tensor(shape);
    for (double& v : nt.t.data) v = r.f64();
    const auto& exp = expected.params().tensors[i];
    if (nt.name != exp.name || nt.t.shape != exp.t.shape)
      throw std::runtime_error("model file: tensor '" + nt.name +
                               "' does not match the declared architecture");
    m.params.tensors.push_back(std::move(nt));
  }
  if (r.pos != r.in.size())
    throw std::runtime_error("model file: trailing bytes after tensors");
  return m;
}

ModelFile load_model_file(const std::string& path) {
  return load_model(read_binary_file(path));
}

void save_model_file(const std::string& path, const ModelFile& m) {
  write_binary_file(path, save_model(m));
}

}  // namespace quake
