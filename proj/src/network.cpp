#include "slosh/network.hpp"

#include <cmath>
#include <cstring>
#include <random>

#include "slosh/binio.hpp"
#include "slosh/errors.hpp"

namespace slosh {

namespace {

using conv::kCells;
using conv::kFreeCells;

void check_finite(Var v, const std::string& stage) {
  if (!v.value().allFinite()) throw NumericalError("network: non-finite activation in " + stage);
}

Var broadcast_concat(Var f, Var fc) { return ad::concat_cols(f, ad::broadcast_rows(fc, f.rows())); }

struct Init {
  ParamStore store;
  std::mt19937_64 rng;

  void kernel(const std::string& name, int in, int out) {
    Matrix m(in, kCells * out);
    conv::init_glorot(m, kCells * in, kCells * out, rng);
    store.add(name, std::move(m));
  }
  void antisym(const std::string& name, int in, int out) {
    Matrix m(in, kFreeCells * out);
    conv::init_glorot(m, kCells * in, kCells * out, rng);
    store.add(name, std::move(m));
  }
  void dense(const std::string& name, int in, int out, bool zero = false) {
    Matrix m = Matrix::Zero(in, out);
    if (!zero) conv::init_glorot(m, in, out, rng);
    store.add(name + ".w", std::move(m));
    store.add(name + ".b", Matrix::Zero(1, out));
  }
  void tff(const std::string& p, int w1, int w2, int fc, int fusion) {
    if (w1 != w2) throw ConfigError("TFF " + p + ": pathway widths differ (" + std::to_string(w1) + " vs " +
                                    std::to_string(w2) + ")");
    kernel(p + ".phi1", w1 + fc, fusion);
    kernel(p + ".phi2", w2 + fc, fusion);
    kernel(p + ".lam1", 2 * fusion, fusion);
    store.add(p + ".lam1_b", Matrix::Zero(1, fusion));
    kernel(p + ".lam2", fusion, w1 + fc);
    store.add(p + ".lam2_b", Matrix::Zero(1, w1 + fc));
  }
};

std::string layer_name(int k) { return "layer" + std::to_string(k + 1); }

}  // namespace

void NetworkConfig::validate() const {
  for (int w : widths)
    if (w <= 0) throw ConfigError("network: layer widths must be positive");
  if (input_width <= 0 || fc_width <= 0 || fusion_width <= 0)
    throw ConfigError("network: input, fc and fusion widths must be positive");
  if (widths[1] != widths[3]) throw ConfigError("network: residual join needs widths[1] == widths[3]");
  if (!(radius > 0.0) || !std::isfinite(radius)) throw ConfigError("network: radius must be positive");
  if (!std::isfinite(output_scale)) throw ConfigError("network: output_scale must be finite");
}

ParamStore init_params(const NetworkConfig& c) {
  c.validate();
  Init in{{}, std::mt19937_64(c.seed)};
  const int c0 = c.input_width, fc = c.fc_width, fu = c.fusion_width;
  in.dense("global_fc", 4, fc);
  in.kernel("input.cconv_ff", 4, c0);
  in.kernel("input.cconv_bf", 4, c0);
  in.kernel("input.cconv_bf2", 4, c0 + fc);
  in.tff("type_tff1", c0, c0, fc, fu);
  in.tff("type_tff2", c0 + fc, c0 + fc, fc, fu);
  int width = c0 + 2 * fc;
  for (int k = 0; k < 5; ++k) {
    const std::string p = layer_name(k);
    const int ck = c.widths[static_cast<std::size_t>(k)];
    in.kernel(p + ".cconv", width, ck);
    in.antisym(p + ".ascc", width, ck);
    in.dense(p + ".fc", width, fc);
    in.tff(p + ".main_tff", ck, ck, fc, fu);
    width = ck + fc;
    if (k == 3) {
      in.tff("res_tff", c.widths[1] + fc, c.widths[3] + fc, fc, fu);
      width = c.widths[3] + 2 * fc;
    }
  }
  in.dense("head", width, 3, /*zero=*/true);
  return std::move(in.store);
}

Var global_feature(Var features, Var weight, Var bias) {
  if (features.rows() == 0) throw InputError("global_feature: no fluid particles");
  return ad::mean_rows(ad::add_bias(ad::matmul(features, weight), bias));
}

TffWeights tff_weights(Tape& tape, const ParamStore& store, const std::string& p) {
  return {tape.param(store, p + ".phi1"), tape.param(store, p + ".phi2"),   tape.param(store, p + ".lam1"),
          tape.param(store, p + ".lam1_b"), tape.param(store, p + ".lam2"), tape.param(store, p + ".lam2_b")};
}

Var tff_forward(const TffWeights& w, Var f1, Var f2, Var fc,
                const std::shared_ptr<const conv::ConvGeometry>& g, Var pos, TffTrace* trace) {
  if (f1.cols() != f2.cols())
    throw ConfigError("tff: pathway widths differ (" + std::to_string(f1.cols()) + " vs " +
                      std::to_string(f2.cols()) + ")");
  if (f1.rows() != f2.rows()) throw ConfigError("tff: pathways are not aligned with the same particles");
  if (fc.rows() != 1) throw ConfigError("tff: global feature must be a single row");
  const Var f1p = broadcast_concat(f1, fc);
  const Var f2p = broadcast_concat(f2, fc);
  const Var p1 = conv::cconv(f1p, w.phi1, g, pos, pos);
  const Var p2 = conv::cconv(f2p, w.phi2, g, pos, pos);
  const Var h = ad::relu(ad::add_bias(conv::cconv(ad::concat_cols(p1, p2), w.lam1, g, pos, pos), w.lam1_b));
  const Var omega = ad::sigmoid(ad::add_bias(conv::cconv(h, w.lam2, g, pos, pos), w.lam2_b));
  if (omega.cols() != f1p.cols()) throw ConfigError("tff: fusion weight width does not match f1'");
  const Var one_minus = ad::add_scalar(ad::scale(omega, -1.0), 1.0);
  const Var out = ad::add(ad::mul(omega, f1p), ad::mul(one_minus, f2p));
  if (trace) {
    trace->f1p = f1p.value();
    trace->f2p = f2p.value();
    trace->omega = omega.value();
    trace->out = out.value();
  }
  return out;
}

Network::Network(const NetworkConfig& config) : config_(config), params_(init_params(config)) {}

Network::Network(const NetworkConfig& config, ParamStore params) : config_(config), params_(std::move(params)) {
  config_.validate();
  const ParamStore ref = init_params(config_);
  if (ref.size() != params_.size()) throw ConfigError("network: parameter count does not match config");
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const auto& a = ref[i];
    const auto& b = params_[i];
    if (a.name != b.name || a.value.rows() != b.value.rows() || a.value.cols() != b.value.cols())
      throw ConfigError("network: parameter " + b.name + " does not match config layout (expected " + a.name +
                        ")");
  }
}

Var Network::forward(Tape& tape, const NetInputs& in, ForwardTrace* trace) const {
  const Eigen::Index n = in.fluid_pos.rows();
  if (n == 0) throw InputError("network: no fluid particles");
  if (in.fluid_pos.cols() != 3 || in.fluid_vel.rows() != n || in.fluid_vel.cols() != 3)
    throw ConfigError("network: fluid positions/velocities must be N x 3");
  if (in.boundary_pos.cols() != 3 || in.boundary_normals.rows() != in.boundary_pos.rows() ||
      in.boundary_normals.cols() != 3)
    throw ConfigError("network: boundary positions/normals must be M x 3");
  if (!in.fluid_pos.value().allFinite() || !in.fluid_vel.value().allFinite())
    throw NumericalError("network: non-finite fluid input");

  const auto& P = params_;
  const double R = config_.radius;
  const bool pos_grad = tape.grad_enabled() && tape.needs_grad(in.fluid_pos.id);
  const auto gff = conv::build_geometry(in.fluid_pos.value(), in.fluid_pos.value(), R, pos_grad);
  const auto gbf = conv::build_geometry(in.fluid_pos.value(), in.boundary_pos, R, pos_grad);
  const Var pos = in.fluid_pos;

  auto tff = [&](const std::string& name, Var f1, Var f2, Var fc) {
    TffTrace* t = nullptr;
    if (trace) {
      trace->tff.push_back({});
      t = &trace->tff.back();
      t->name = name;
    }
    Var out = ad::relu(tff_forward(tff_weights(tape, P, name), f1, f2, fc, gff, pos, t));
    check_finite(out, name);
    return out;
  };

  // Type-aware input: fluid (v*, 1), boundary (n, 0).
  const Var fluid_in = ad::concat_cols(in.fluid_vel, tape.constant(Matrix::Ones(n, 1)));
  const Var bnd_in = tape.constant(
      [&] {
        Matrix m(in.boundary_normals.rows(), 4);
        m.leftCols(3) = in.boundary_normals;
        m.col(3).setZero();
        return m;
      }());
  const Var g0 = global_feature(fluid_in, tape.param(P, "global_fc.w"), tape.param(P, "global_fc.b"));

  const Var ff = conv::cconv(fluid_in, tape.param(P, "input.cconv_ff"), gff, pos, pos);
  const Var bf = conv::cconv(bnd_in, tape.param(P, "input.cconv_bf"), gbf, pos, Var{});
  const Var bf2 = conv::cconv(bnd_in, tape.param(P, "input.cconv_bf2"), gbf, pos, Var{});
  check_finite(ff, "input");
  const Var t1 = tff("type_tff1", ff, bf, g0);
  Var x = tff("type_tff2", t1, bf2, g0);

  Var m2;
  for (int k = 0; k < 5; ++k) {
    const std::string p = layer_name(k);
    const Var c = conv::cconv(x, tape.param(P, p + ".cconv"), gff, pos, pos);
    const Var full = conv::materialize_antisym(tape.param(P, p + ".ascc"), config_.widths[static_cast<std::size_t>(k)]);
    const Var s = conv::ascc(x, full, gff, pos);
    const Var g = global_feature(x, tape.param(P, p + ".fc.w"), tape.param(P, p + ".fc.b"));
    check_finite(c, p + ".cconv");
    check_finite(s, p + ".ascc");
    x = tff(p + ".main_tff", c, s, g);
    if (trace) trace->layer_out[static_cast<std::size_t>(k)] = x.value();
    if (k == 1) m2 = x;
    if (k == 3) {
      if (trace) {
        trace->res_in1 = m2.value();
        trace->res_in2 = x.value();
      }
      x = tff("res_tff", m2, x, g);
    }
  }
  if (trace) trace->head_in = x.value();
  const Var head = ad::add_bias(ad::matmul(x, tape.param(P, "head.w")), tape.param(P, "head.b"));
  const Var dx = ad::scale(head, config_.output_scale);
  check_finite(dx, "head");
  return dx;
}

Matrix Network::predict(const Matrix& fluid_pos, const Matrix& fluid_vel, const Matrix& boundary_pos,
                        const Matrix& boundary_normals) const {
  Tape tape(false);
  NetInputs in{tape.constant(fluid_pos), tape.constant(fluid_vel), boundary_pos, boundary_normals};
  return forward(tape, in).value();
}

namespace {
constexpr char kCkptMagic[8] = {'S', 'L', 'S', 'H', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCkptVersion = 1;
}  // namespace

std::string serialize_checkpoint(const Network& net) {
  const auto& c = net.config();
  binio::Writer w;
  w.bytes(std::string_view(kCkptMagic, 8));
  w.u32(kCkptVersion);
  w.u32(binio::kEndianTag);
  for (int v : c.widths) w.u32(static_cast<std::uint32_t>(v));
  w.u32(static_cast<std::uint32_t>(c.input_width));
  w.u32(static_cast<std::uint32_t>(c.fc_width));
  w.u32(static_cast<std::uint32_t>(c.fusion_width));
  w.f64(c.radius);
  w.f64(c.output_scale);
  w.u64(c.seed);
  const auto& P = net.params();
  w.u32(static_cast<std::uint32_t>(P.size()));
  std::uint64_t offset = 0;
  for (const auto& p : P) {
    w.str(p.name);
    w.u64(static_cast<std::uint64_t>(p.value.rows()));
    w.u64(static_cast<std::uint64_t>(p.value.cols()));
    w.u64(offset);
    offset += static_cast<std::uint64_t>(p.value.size()) * 8;
  }
  w.u64(offset);
  for (const auto& p : P)
    w.bytes(std::string_view(reinterpret_cast<const char*>(p.value.data()),
                             static_cast<std::size_t>(p.value.size()) * 8));
  w.u64(binio::fnv1a64(w.data()));
  return std::move(w.data());
}

Network deserialize_checkpoint(std::string_view bytes, const std::string& what) {
  if (bytes.size() < 8 || std::string_view(bytes.data(), 8) != std::string_view(kCkptMagic, 8))
    throw CorruptionError(what + ": not a checkpoint (bad magic)");
  binio::Reader r(bytes, what);
  r.bytes(8);
  const std::uint32_t version = r.u32();
  if (version != kCkptVersion)
    throw VersionError(what + ": checkpoint version " + std::to_string(version) + ", expected " +
                       std::to_string(kCkptVersion));
  if (r.u32() != binio::kEndianTag) throw CorruptionError(what + ": endianness tag mismatch");
  if (bytes.size() < 8 + r.pos()) throw CorruptionError(what + ": truncated");
  const std::uint64_t stored = binio::Reader(bytes.substr(bytes.size() - 8), what).u64();
  if (stored != binio::fnv1a64(bytes.substr(0, bytes.size() - 8)))
    throw CorruptionError(what + ": checksum mismatch");
  NetworkConfig c;
  for (int& v : c.widths) v = static_cast<int>(r.u32());
  c.input_width = static_cast<int>(r.u32());
  c.fc_width = static_cast<int>(r.u32());
  c.fusion_width = static_cast<int>(r.u32());
  c.radius = r.f64();
  c.output_scale = r.f64();
  c.seed = r.u64();
  const std::uint32_t count = r.u32();
  struct Entry {
    std::string name;
    std::uint64_t rows, cols, offset;
  };
  std::vector<Entry> entries;
  for (std::uint32_t i = 0; i < count; ++i) {
    Entry e;
    e.name = r.str();
    e.rows = r.u64();
    e.cols = r.u64();
    e.offset = r.u64();
    entries.push_back(std::move(e));
  }
  const std::uint64_t payload = r.u64();
  if (payload != r.remaining() - 8) throw CorruptionError(what + ": payload length does not match manifest");
  const std::size_t base = r.pos();
  ParamStore store;
  for (const auto& e : entries) {
    if (e.rows * e.cols * 8 > payload || e.offset > payload - e.rows * e.cols * 8)
      throw CorruptionError(what + ": parameter " + e.name + " lies outside the payload");
    Matrix m(static_cast<Eigen::Index>(e.rows), static_cast<Eigen::Index>(e.cols));
    r.seek(base + e.offset);
    const auto raw = r.bytes(e.rows * e.cols * 8);
    std::memcpy(m.data(), raw.data(), raw.size());
    store.add(e.name, std::move(m));
  }
  return Network(c, std::move(store));
}

void save_checkpoint(const Network& net, const std::filesystem::path& path) {
  binio::atomic_write(path, serialize_checkpoint(net));
}

Network load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(binio::read_file(path), path.string());
}

}  // namespace slosh
