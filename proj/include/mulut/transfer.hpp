// SPDX-FileCopyrightText: © 2026 The mulut Authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

//
// Building tables by traversing every grid tuple of a block function, and
// checking tables produced elsewhere (the Python trainer) before use.
//

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iterator>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "mulut/error.hpp"
#include "mulut/lut.hpp"
#include "mulut/pipeline.hpp"

namespace mulut {

/// Grid tuple; only the first n coordinates are meaningful.
using GridTuple = std::array<int, 4>;

/// All (2^(8-q)+1)^n grid tuples in row-major order (last coordinate fastest).
class GridRange {
 public:
  class iterator {
   public:
    using iterator_category = std::forward_iterator_tag;
    using value_type = GridTuple;
    using difference_type = std::ptrdiff_t;
    using pointer = const GridTuple*;
    using reference = const GridTuple&;

    iterator() = default;
    iterator(const GridRange* range, std::size_t index) : range_(range), index_(index) {
      if (range_ && index_ < range_->size()) cur_ = (*range_)[index_];
    }
    reference operator*() const { return cur_; }
    pointer operator->() const { return &cur_; }
    iterator& operator++() {
      ++index_;
      // odometer increment
      for (int d = range_->n() - 1; d >= 0; --d) {
        cur_[static_cast<std::size_t>(d)] += range_->grid_.step();
        if (cur_[static_cast<std::size_t>(d)] <= range_->grid_.value(range_->grid_.levels() - 1)) break;
        cur_[static_cast<std::size_t>(d)] = 0;
      }
      return *this;
    }
    iterator operator++(int) {
      iterator t = *this;
      ++*this;
      return t;
    }
    friend bool operator==(const iterator& a, const iterator& b) { return a.index_ == b.index_; }

   private:
    const GridRange* range_ = nullptr;
    std::size_t index_ = 0;
    GridTuple cur_{};
  };

  GridRange(int n, int q) : n_(n), grid_(q) {
    if (n != 3 && n != 4) throw Error(Errc::kRange, "enumerate_grid: n must be 3 or 4");
    size_ = 1;
    for (int d = 0; d < n; ++d) size_ *= static_cast<std::size_t>(grid_.levels());
  }

  int n() const { return n_; }
  const SamplingGrid& grid() const { return grid_; }
  std::size_t size() const { return size_; }

  GridTuple operator[](std::size_t index) const {
    GridTuple t{};
    for (int d = n_ - 1; d >= 0; --d) {
      t[static_cast<std::size_t>(d)] = grid_.value(static_cast<int>(index % static_cast<std::size_t>(grid_.levels())));
      index /= static_cast<std::size_t>(grid_.levels());
    }
    return t;
  }

  iterator begin() const { return iterator(this, 0); }
  iterator end() const { return iterator(this, size_); }

 private:
  int n_;
  SamplingGrid grid_;
  std::size_t size_ = 0;
};

inline GridRange enumerate_grid(int n, int q) { return GridRange(n, q); }

/// Block function: n pixel values in [0, 255] -> m real outputs.
using BlockFunction = std::function<void(std::span<const int> in, std::span<double> out)>;

/// Pixel-domain encoding of a real output: round-half-up after clamping.
inline std::uint8_t encode_value(double v) {
  if (std::isnan(v)) throw Error(Errc::kNumeric, "block function returned NaN");
  return static_cast<std::uint8_t>(std::floor(std::clamp(v, 0.0, 255.0) + 0.5));
}

/// Evaluates fn at every grid tuple (the 256 level is presented as 255).
/// Entries are filled in disjoint slices; the table does not depend on `threads`.
inline LutTable cache_function(const BlockFunction& fn, int n, int m, int q, int threads = 1) {
  const GridRange range(n, q);
  std::vector<std::uint8_t> values(range.size() * static_cast<std::size_t>(m));
  auto fill = [&](std::size_t lo, std::size_t hi) {
    std::array<int, 4> in{};
    std::vector<double> out(static_cast<std::size_t>(m));
    for (std::size_t e = lo; e < hi; ++e) {
      const GridTuple t = range[e];
      for (int d = 0; d < n; ++d) in[static_cast<std::size_t>(d)] = std::min(t[static_cast<std::size_t>(d)], 255);
      std::fill(out.begin(), out.end(), 0.0);
      fn(std::span<const int>(in.data(), static_cast<std::size_t>(n)), out);
      for (int v = 0; v < m; ++v) values[e * static_cast<std::size_t>(m) + static_cast<std::size_t>(v)] = encode_value(out[static_cast<std::size_t>(v)]);
    }
  };
  threads = std::max(1, threads);
  if (threads == 1) {
    fill(0, range.size());
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) {
      const std::size_t lo = range.size() * static_cast<std::size_t>(t) / static_cast<std::size_t>(threads);
      const std::size_t hi = range.size() * static_cast<std::size_t>(t + 1) / static_cast<std::size_t>(threads);
      pool.emplace_back(fill, lo, hi);
    }
  }
  return LutTable(q, n, m, std::move(values));
}

/// Analytic block functions shipped with the tool (`convert --function`).
struct BuiltinFunction {
  std::string id;
  int n = 4;
  int m = 1;
  BlockFunction fn;
};

inline std::vector<std::string> builtin_function_names() {
  return {"copy-anchor", "mean", "bilinear", "constant-128", "identity-rgb", "swap-rgb"};
}

/// Spatial functions emit r*r values per entry (pixel-shuffle order).
/// `bilinear` places sub-pixel (a, b) at (a/r, b/r) between the anchor, its
/// pattern neighbours 1 and 2, and the far corner 3.
inline BuiltinFunction builtin_function(const std::string& id, int upscale = 1) {
  if (upscale < 1 || upscale > 8) throw Error(Errc::kRange, "upscale must be in [1, 8]");
  const int r = upscale;
  const int r2 = r * r;
  BuiltinFunction f{id, 4, r2, {}};
  if (id == "copy-anchor") {
    f.fn = [r2](std::span<const int> in, std::span<double> out) {
      for (int v = 0; v < r2; ++v) out[static_cast<std::size_t>(v)] = in[0];
    };
  } else if (id == "mean") {
    f.fn = [r2](std::span<const int> in, std::span<double> out) {
      const double mu = (in[0] + in[1] + in[2] + in[3]) / 4.0;
      for (int v = 0; v < r2; ++v) out[static_cast<std::size_t>(v)] = mu;
    };
  } else if (id == "bilinear") {
    f.fn = [r](std::span<const int> in, std::span<double> out) {
      for (int a = 0; a < r; ++a)
        for (int b = 0; b < r; ++b) {
          const double u = static_cast<double>(a) / r;
          const double w = static_cast<double>(b) / r;
          out[static_cast<std::size_t>(a * r + b)] =
              (1 - u) * (1 - w) * in[0] + (1 - u) * w * in[1] + u * (1 - w) * in[2] + u * w * in[3];
        }
    };
  } else if (id == "constant-128") {
    f.fn = [r2](std::span<const int>, std::span<double> out) {
      for (int v = 0; v < r2; ++v) out[static_cast<std::size_t>(v)] = 128;
    };
  } else if (id == "identity-rgb" || id == "swap-rgb") {
    if (r != 1) throw Error(Errc::kRange, id + ": channel functions do not upscale");
    f.n = 3;
    f.m = 3;
    const bool swap = id == "swap-rgb";
    f.fn = [swap](std::span<const int> in, std::span<double> out) {
      for (std::size_t c = 0; c < 3; ++c) out[c] = swap ? in[(c + 1) % 3] : in[c];
    };
  } else {
    throw Error(Errc::kConfig, "unknown builtin function '" + id + "'");
  }
  return f;
}

/// Checks a MULUT1 stream against the block it is meant to fill. Returns an
/// empty list when the file is usable; otherwise one entry per problem,
/// each starting with the offending field name.
inline std::vector<std::string> validate_import(std::span<const std::uint8_t> bytes, const BlockSpec& expected,
                                                std::optional<LutRole> role = std::nullopt,
                                                bool allow_constant = false) {
  std::vector<std::string> out;
  LutFile file;
  try {
    file = read_lut(bytes);
  } catch (const Error& e) {
    out.push_back(std::string(errc_name(e.code())) + ": " + e.what());
    return out;
  }
  out = header_mismatches(file, expected, role);
  const auto vals = file.table.values();
  if (!allow_constant && !vals.empty() && std::all_of(vals.begin(), vals.end(), [&](std::uint8_t v) { return v == vals[0]; })) {
    out.push_back("payload: every value equals " + std::to_string(vals[0]) + " (constant table not declared)");
  }
  return out;
}

}  // namespace mulut
