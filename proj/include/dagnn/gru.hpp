#pragma once

#include <string>

#include "dagnn/tape.hpp"

namespace dagnn::num {

// Standard GRU, reset-before-candidate formulation:
//   z = sigmoid(m Wz + h Uz + bz)
//   r = sigmoid(m Wr + h Ur + br)
//   c = tanh(m Wh + (r .* h) Uh + bh)
//   h' = (1 - z) .* h + z .* c
struct GruNames {
  std::string Wz, Uz, bz, Wr, Ur, br, Wh, Uh, bh;

  static GruNames at(const std::string& prefix) {
    return {prefix + ".Wz", prefix + ".Uz", prefix + ".bz",
            prefix + ".Wr", prefix + ".Ur", prefix + ".br",
            prefix + ".Wh", prefix + ".Uh", prefix + ".bh"};
  }
};

template <typename T>
inline GruNames create_gru(ParamStore<T>& store, const std::string& prefix, Index d,
                           Rng& rng) {
  const GruNames names = GruNames::at(prefix);
  const T scale = T(1) / std::sqrt(static_cast<T>(d));
  store.create_gaussian(names.Wz, d, d, scale, rng);
  store.create_gaussian(names.Uz, d, d, scale, rng);
  store.create(names.bz, 1, d);
  store.create_gaussian(names.Wr, d, d, scale, rng);
  store.create_gaussian(names.Ur, d, d, scale, rng);
  store.create(names.br, 1, d);
  store.create_gaussian(names.Wh, d, d, scale, rng);
  store.create_gaussian(names.Uh, d, d, scale, rng);
  store.create(names.bh, 1, d);
  return names;
}

// parameter leaf ids on one tape, created once per forward pass
struct GruLeaves {
  int Wz, Uz, bz, Wr, Ur, br, Wh, Uh, bh;
};

template <typename T>
inline GruLeaves gru_leaves(Tape<T>& t, const GruNames& w) {
  return {t.param(w.Wz), t.param(w.Uz), t.param(w.bz),
          t.param(w.Wr), t.param(w.Ur), t.param(w.br),
          t.param(w.Wh), t.param(w.Uh), t.param(w.bh)};
}

// h, m: [n x d]; applied row-wise to all n states at once
template <typename T>
inline int gru_cell(Tape<T>& t, int h, int m, const GruLeaves& w) {
  const int z = t.sigmoid(
      t.add_rowvec(t.add(t.matmul(m, w.Wz), t.matmul(h, w.Uz)), w.bz));
  const int r = t.sigmoid(
      t.add_rowvec(t.add(t.matmul(m, w.Wr), t.matmul(h, w.Ur)), w.br));
  const int cand = t.tanh(t.add_rowvec(
      t.add(t.matmul(m, w.Wh), t.matmul(t.hadamard(r, h), w.Uh)), w.bh));
  // h + z.*c - z.*h
  return t.add(t.add(h, t.hadamard(z, cand)), t.scale(t.hadamard(z, h), T(-1)));
}

template <typename T>
inline int gru_cell(Tape<T>& t, int h, int m, const GruNames& w) {
  return gru_cell(t, h, m, gru_leaves(t, w));
}

}  // namespace dagnn::num
