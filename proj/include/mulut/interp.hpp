// SPDX-FileCopyrightText: © 2026 The mulut Authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

//
// Simplex interpolation over a uniformly sampled table.
//
// For a query x the cell is c_d = x_d >> q and the fraction f_d = x_d & (W-1)
// with W = 2^q. Sorting the fractions in descending order, f(1) >= ... >= f(n)
// (ties keep ascending dimension order), the cell is split into n! simplices
// and the query lies in the one spanned by
//
//   P0 = c,  P1 = P0 + e(1),  ...,  Pn = P(n-1) + e(n)
//
// where e(k) steps the dimension holding the k-th largest fraction. The
// barycentric weights are
//
//   w0 = W - f(1),  wk = f(k) - f(k+1),  wn = f(n)
//
// which are non-negative and sum to W. Output = sum(wk * Pk) / W. Everything
// stays in integers; the division by W is left to the caller so that several
// interpolations can be averaged before a single rounding step.
//
// n = 3 is the classic tetrahedral interpolation used by colour LUTs, n = 4
// is its 4D analogue used by spatial LUTs.
//

#include <array>
#include <cassert>
#include <cstdint>
#include <vector>

#include "mulut/error.hpp"
#include "mulut/lut.hpp"

namespace mulut {

template <int N>
struct Simplex {
  std::array<std::uint32_t, N + 1> vertex{};  // entry indices P0..PN
  std::array<std::uint32_t, N + 1> weight{};  // w0..wN, sum == W
  std::array<std::uint8_t, N> order{};        // order[k] = dimension stepped by e(k+1)
};

/// Locates the simplex containing x. `levels` is the grid size per dimension.
template <int N>
inline Simplex<N> locate_simplex(int q, int levels, const std::array<std::uint8_t, N>& x) {
  const std::uint32_t w = 1u << q;
  const std::uint32_t mask = w - 1;
  std::array<std::uint32_t, N> stride{};
  std::uint32_t s = 1;
  for (int d = N - 1; d >= 0; --d) {
    stride[d] = s;
    s *= static_cast<std::uint32_t>(levels);
  }

  Simplex<N> out;
  std::array<std::uint32_t, N> frac{};
  std::uint32_t base = 0;
  for (int d = 0; d < N; ++d) {
    base += (static_cast<std::uint32_t>(x[d]) >> q) * stride[d];
    frac[d] = x[d] & mask;
    out.order[d] = static_cast<std::uint8_t>(d);
  }
  // Stable insertion sort, descending by fraction.
  for (int i = 1; i < N; ++i) {
    const std::uint8_t key = out.order[i];
    int j = i - 1;
    while (j >= 0 && frac[out.order[j]] < frac[key]) {
      out.order[j + 1] = out.order[j];
      --j;
    }
    out.order[j + 1] = key;
  }

  out.vertex[0] = base;
  out.weight[0] = w - frac[out.order[0]];
  for (int k = 1; k <= N; ++k) {
    out.vertex[k] = out.vertex[k - 1] + stride[out.order[k - 1]];
    const std::uint32_t hi = frac[out.order[k - 1]];
    const std::uint32_t lo = k < N ? frac[out.order[k]] : 0;
    out.weight[k] = hi - lo;
  }
#ifndef NDEBUG
  std::uint32_t total = 0;
  for (auto wk : out.weight) total += wk;
  assert(total == w);
#endif
  return out;
}

/// Numerators of the interpolated values; the true value is numerator / denominator.
struct Interpolated {
  std::vector<std::uint32_t> numerator;
  std::uint32_t denominator = 1;
};

template <int N>
inline Interpolated interpolate(const LutTable& table, const std::array<std::uint8_t, N>& x) {
  if (table.n() != N) throw Error(Errc::kGeometry, "interpolate: table dimension does not match query");
  const auto sx = locate_simplex<N>(table.q(), table.levels(), x);
  Interpolated out;
  out.denominator = 1u << table.q();
  out.numerator.assign(static_cast<std::size_t>(table.m()), 0);
  for (int v = 0; v < table.m(); ++v) {
    std::uint32_t acc = 0;
    for (int k = 0; k <= N; ++k) acc += sx.weight[k] * table.at(sx.vertex[k], v);
    out.numerator[static_cast<std::size_t>(v)] = acc;
  }
  return out;
}

inline Interpolated simplex_interp_4d(const LutTable& table, const std::array<std::uint8_t, 4>& x) {
  return interpolate<4>(table, x);
}

inline Interpolated tetrahedral_interp_3d(const LutTable& table, const std::array<std::uint8_t, 3>& x) {
  return interpolate<3>(table, x);
}

}  // namespace mulut
