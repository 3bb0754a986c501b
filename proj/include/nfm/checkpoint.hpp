#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include "nfm/nfm.hpp"

// Binary checkpoint formats (little-endian, 64-bit floats, lossless):
//
//   FM:  magic "NFMFM01\n", u64 n, u64 k, f64 w0, f64 w[n], f64 V[n*k] row-major
//   NFM: magic "NFMNN01\n", the FM block without its magic, then
//        u8 pooling, u64 L, per layer { u64 d_out, u64 d_in, u8 activation,
//        f64 W[d_out*d_in] row-major, f64 b[d_out] }, u64 output_dim, f64 h[...],
//        u8 bn_enabled, and if set, per normalized layer (L+1 of them)
//        { u64 dim, f64 gamma[dim], beta[dim], running_mean[dim],
//          running_var[dim], f64 momentum, f64 epsilon }

namespace nfm {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is defined little-endian");

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

constexpr char kFmMagic[8] = {'N', 'F', 'M', 'F', 'M', '0', '1', '\n'};
constexpr char kNfmMagic[8] = {'N', 'F', 'M', 'N', 'N', '0', '1', '\n'};

inline void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), 8);
}

inline void write_u8(std::ostream& out, std::uint8_t v) {
  out.write(reinterpret_cast<const char*>(&v), 1);
}

inline void write_f64(std::ostream& out, const double* data, std::size_t count) {
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * 8));
}

inline std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v;
  if (!in.read(reinterpret_cast<char*>(&v), 8)) throw CheckpointError("checkpoint truncated");
  return v;
}

inline std::uint8_t read_u8(std::istream& in) {
  std::uint8_t v;
  if (!in.read(reinterpret_cast<char*>(&v), 1)) throw CheckpointError("checkpoint truncated");
  return v;
}

inline void read_f64(std::istream& in, double* data, std::size_t count) {
  if (!in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * 8))) {
    throw CheckpointError("checkpoint truncated");
  }
}

inline void expect_magic(std::istream& in, const char (&magic)[8], const char* kind) {
  char buf[8];
  if (!in.read(buf, 8) || std::memcmp(buf, magic, 8) != 0) {
    throw CheckpointError(std::string("not a ") + kind + " checkpoint (bad magic header)");
  }
}

inline void write_fm_body(std::ostream& out, const FmParams<double>& m) {
  write_u64(out, static_cast<std::uint64_t>(m.num_features()));
  write_u64(out, static_cast<std::uint64_t>(m.num_factors()));
  write_f64(out, &m.bias, 1);
  write_f64(out, m.linear.data(), static_cast<std::size_t>(m.linear.size()));
  write_f64(out, m.embeddings.data(), static_cast<std::size_t>(m.embeddings.size()));
}

inline FmParams<double> read_fm_body(std::istream& in) {
  FmParams<double> m;
  const auto n = static_cast<Index>(read_u64(in));
  const auto k = static_cast<Index>(read_u64(in));
  if (n < 1 || k < 1 || n > (Index(1) << 32) || k > (Index(1) << 24)) {
    throw CheckpointError("implausible checkpoint dimensions");
  }
  read_f64(in, &m.bias, 1);
  m.linear.resize(n);
  read_f64(in, m.linear.data(), static_cast<std::size_t>(n));
  m.embeddings.resize(n, k);
  read_f64(in, m.embeddings.data(), static_cast<std::size_t>(n * k));
  return m;
}

}  // namespace detail

inline void save_fm(const FmParams<double>& m, std::ostream& out) {
  out.write(detail::kFmMagic, 8);
  detail::write_fm_body(out, m);
  if (!out) throw CheckpointError("failed to write checkpoint");
}

inline FmParams<double> load_fm(std::istream& in) {
  detail::expect_magic(in, detail::kFmMagic, "FM");
  return detail::read_fm_body(in);
}

inline void save_nfm(const NfmParams<double>& p, std::ostream& out) {
  out.write(detail::kNfmMagic, 8);
  detail::write_fm_body(out, p.fm);
  detail::write_u8(out, static_cast<std::uint8_t>(p.pooling));
  detail::write_u64(out, static_cast<std::uint64_t>(p.hidden.size()));
  for (const auto& layer : p.hidden) {
    detail::write_u64(out, static_cast<std::uint64_t>(layer.weight.rows()));
    detail::write_u64(out, static_cast<std::uint64_t>(layer.weight.cols()));
    detail::write_u8(out, static_cast<std::uint8_t>(layer.activation));
    detail::write_f64(out, layer.weight.data(), static_cast<std::size_t>(layer.weight.size()));
    detail::write_f64(out, layer.bias.data(), static_cast<std::size_t>(layer.bias.size()));
  }
  detail::write_u64(out, static_cast<std::uint64_t>(p.prediction.size()));
  detail::write_f64(out, p.prediction.data(), static_cast<std::size_t>(p.prediction.size()));
  detail::write_u8(out, p.bn_enabled ? 1 : 0);
  if (p.bn_enabled) {
    for (const auto& bn : p.bn) {
      detail::write_u64(out, static_cast<std::uint64_t>(bn.dim()));
      detail::write_f64(out, bn.gamma.data(), static_cast<std::size_t>(bn.dim()));
      detail::write_f64(out, bn.beta.data(), static_cast<std::size_t>(bn.dim()));
      detail::write_f64(out, bn.running_mean.data(), static_cast<std::size_t>(bn.dim()));
      detail::write_f64(out, bn.running_var.data(), static_cast<std::size_t>(bn.dim()));
      detail::write_f64(out, &bn.momentum, 1);
      detail::write_f64(out, &bn.epsilon, 1);
    }
  }
  if (!out) throw CheckpointError("failed to write checkpoint");
}

inline NfmParams<double> load_nfm(std::istream& in) {
  detail::expect_magic(in, detail::kNfmMagic, "NFM");
  NfmParams<double> p;
  p.fm = detail::read_fm_body(in);
  const auto pooling = detail::read_u8(in);
  if (pooling > 2) throw CheckpointError("unknown pooling tag");
  p.pooling = static_cast<Pooling>(pooling);
  const auto num_layers = static_cast<Index>(detail::read_u64(in));
  if (num_layers < 0 || num_layers > 1024) throw CheckpointError("implausible layer count");
  for (Index l = 0; l < num_layers; ++l) {
    DenseLayer<double> layer;
    const auto rows = static_cast<Index>(detail::read_u64(in));
    const auto cols = static_cast<Index>(detail::read_u64(in));
    if (rows < 1 || cols < 1 || rows > (Index(1) << 24) || cols > (Index(1) << 24)) {
      throw CheckpointError("implausible layer dimensions");
    }
    const auto act = detail::read_u8(in);
    if (act > 3) throw CheckpointError("unknown activation tag");
    layer.activation = static_cast<Activation>(act);
    layer.weight.resize(rows, cols);
    detail::read_f64(in, layer.weight.data(), static_cast<std::size_t>(rows * cols));
    layer.bias.resize(rows);
    detail::read_f64(in, layer.bias.data(), static_cast<std::size_t>(rows));
    p.hidden.push_back(std::move(layer));
  }
  const auto out_dim = static_cast<Index>(detail::read_u64(in));
  if (out_dim < 1 || out_dim > (Index(1) << 24)) throw CheckpointError("implausible output dimension");
  p.prediction.resize(out_dim);
  detail::read_f64(in, p.prediction.data(), static_cast<std::size_t>(out_dim));
  p.bn_enabled = detail::read_u8(in) != 0;
  if (p.bn_enabled) {
    for (Index s = 0; s <= num_layers; ++s) {
      BatchNormState<double> bn;
      const auto dim = static_cast<Index>(detail::read_u64(in));
      if (dim < 1 || dim > (Index(1) << 24)) throw CheckpointError("implausible batch-norm dimension");
      bn.gamma.resize(dim);
      bn.beta.resize(dim);
      bn.running_mean.resize(dim);
      bn.running_var.resize(dim);
      detail::read_f64(in, bn.gamma.data(), static_cast<std::size_t>(dim));
      detail::read_f64(in, bn.beta.data(), static_cast<std::size_t>(dim));
      detail::read_f64(in, bn.running_mean.data(), static_cast<std::size_t>(dim));
      detail::read_f64(in, bn.running_var.data(), static_cast<std::size_t>(dim));
      detail::read_f64(in, &bn.momentum, 1);
      detail::read_f64(in, &bn.epsilon, 1);
      p.bn.push_back(std::move(bn));
    }
  }
  return p;
}

inline void save_fm(const FmParams<double>& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot open " + path + " for writing");
  save_fm(m, out);
}

inline FmParams<double> load_fm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path);
  return load_fm(in);
}

inline void save_nfm(const NfmParams<double>& p, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot open " + path + " for writing");
  save_nfm(p, out);
}

inline NfmParams<double> load_nfm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path);
  return load_nfm(in);
}

}  // namespace nfm
