#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "dagnn/rng.hpp"
#include "dagnn/tensor.hpp"

namespace dagnn::num {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Named parameters plus gradient and Adam state. Trainable entries are
// updated by adam_step; buffers (frozen RFF coefficients, spectral-norm
// vectors, the fitted covariance) live in the same store so that a
// checkpoint is one flat name -> tensor map.
template <typename T>
class ParamStore {
 public:
  Mat<T>& create(const std::string& name, Index rows, Index cols,
                 bool trainable = true) {
    require(!slots_.contains(name), "ParamStore: duplicate name " + name);
    Slot& s = slots_[name];
    s.value = Mat<T>::Zero(rows, cols);
    s.grad = Mat<T>::Zero(rows, cols);
    s.m = Mat<T>::Zero(rows, cols);
    s.v = Mat<T>::Zero(rows, cols);
    s.trainable = trainable;
    return s.value;
  }

  Mat<T>& create_gaussian(const std::string& name, Index rows, Index cols,
                          T scale, Rng& rng, bool trainable = true) {
    Mat<T>& m = create(name, rows, cols, trainable);
    for (Index r = 0; r < rows; ++r)
      for (Index c = 0; c < cols; ++c)
        m(r, c) = static_cast<T>(rng.normal()) * scale;
    return m;
  }

  bool has(const std::string& name) const { return slots_.contains(name); }

  Mat<T>& value(const std::string& name) { return slot(name).value; }
  const Mat<T>& value(const std::string& name) const { return slot(name).value; }
  Mat<T>& grad(const std::string& name) { return slot(name).grad; }
  bool trainable(const std::string& name) const { return slot(name).trainable; }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : slots_) out.push_back(k);
    return out;
  }

  std::size_t size() const { return slots_.size(); }

  void zero_grad() {
    for (auto& [k, s] : slots_) s.grad.setZero();
  }

  // Standard Adam with bias correction; one shared step counter.
  void adam_step(const AdamConfig& cfg) {
    ++step_;
    const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
    const T c1 = T(1) - std::pow(b1, static_cast<T>(step_));
    const T c2 = T(1) - std::pow(b2, static_cast<T>(step_));
    for (auto& [k, s] : slots_) {
      if (!s.trainable) continue;
      require_finite(s.grad, "adam_step gradient");
      s.m = b1 * s.m + (T(1) - b1) * s.grad;
      s.v = b2 * s.v + (T(1) - b2) * s.grad.cwiseProduct(s.grad).eval();
      Mat<T> mhat = s.m / c1;
      Mat<T> vhat = s.v / c2;
      s.value -= static_cast<T>(cfg.lr) *
                 (mhat.array() / (vhat.array().sqrt() + static_cast<T>(cfg.eps)))
                     .matrix();
    }
  }

  // Checkpoint: "DAGN" magic, u32 version, u32 entry count, per-entry name and
  // shape manifest, then flat row-major 64-bit little-endian value blocks in
  // manifest order. Round-trip is bit-exact.
  void save(const std::string& path) const {
    static_assert(std::endian::native == std::endian::little);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(out.good(), "ParamStore::save: cannot open " + path);
    out.write("DAGN", 4);
    write_u32(out, kFormatVersion);
    write_u32(out, static_cast<std::uint32_t>(slots_.size()));
    for (const auto& [name, s] : slots_) {
      write_u32(out, static_cast<std::uint32_t>(name.size()));
      out.write(name.data(), static_cast<std::streamsize>(name.size()));
      write_u32(out, static_cast<std::uint32_t>(s.value.rows()));
      write_u32(out, static_cast<std::uint32_t>(s.value.cols()));
      write_u32(out, s.trainable ? 1u : 0u);
    }
    for (const auto& [name, s] : slots_) {
      for (Index r = 0; r < s.value.rows(); ++r)
        for (Index c = 0; c < s.value.cols(); ++c) {
          double d = static_cast<double>(s.value(r, c));
          out.write(reinterpret_cast<const char*>(&d), sizeof(double));
        }
    }
    require(out.good(), "ParamStore::save: write failed for " + path);
  }

  static ParamStore<T> load(const std::string& path) {
    static_assert(std::endian::native == std::endian::little);
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "ParamStore::load: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    require(in.good() && std::memcmp(magic, "DAGN", 4) == 0,
            "ParamStore::load: bad magic in " + path);
    const std::uint32_t version = read_u32(in);
    require(version == kFormatVersion,
            "ParamStore::load: unsupported format version");
    const std::uint32_t count = read_u32(in);
    struct Meta {
      std::string name;
      std::uint32_t rows, cols, trainable;
    };
    std::vector<Meta> metas(count);
    for (auto& m : metas) {
      std::uint32_t len = read_u32(in);
      m.name.resize(len);
      in.read(m.name.data(), len);
      m.rows = read_u32(in);
      m.cols = read_u32(in);
      m.trainable = read_u32(in);
    }
    ParamStore<T> store;
    for (const auto& m : metas) {
      Mat<T>& mat = store.create(m.name, m.rows, m.cols, m.trainable != 0);
      for (Index r = 0; r < mat.rows(); ++r)
        for (Index c = 0; c < mat.cols(); ++c) {
          double d;
          in.read(reinterpret_cast<char*>(&d), sizeof(double));
          mat(r, c) = static_cast<T>(d);
        }
    }
    require(in.good(), "ParamStore::load: truncated file " + path);
    return store;
  }

 private:
  static constexpr std::uint32_t kFormatVersion = 1;

  struct Slot {
    Mat<T> value, grad, m, v;
    bool trainable = true;
  };

  Slot& slot(const std::string& name) {
    auto it = slots_.find(name);
    require(it != slots_.end(), "ParamStore: unknown name " + name);
    return it->second;
  }
  const Slot& slot(const std::string& name) const {
    auto it = slots_.find(name);
    require(it != slots_.end(), "ParamStore: unknown name " + name);
    return it->second;
  }

  static void write_u32(std::ofstream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
  }
  static std::uint32_t read_u32(std::ifstream& in) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
  }

  std::map<std::string, Slot> slots_;
  std::int64_t step_ = 0;
};

}  // namespace dagnn::num
