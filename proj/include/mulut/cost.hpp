// SPDX-FileCopyrightText: © 2026 The mulut Authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

//
// Operation counts and energy estimates for LUT pipelines.
//
// Counting conventions, per table lookup with n index dimensions and m
// values per entry:
//   int8 add    n (fraction extraction) + n(n-1)/2 (sorting compares)
//               + n (weight differences)           -> 14 for n = 4, 9 for n = 3
//   int32 mult  n - 1 (entry address)
//   int32 add   n - 1 (entry address) + n (vertex offsets)
//   per value   n + 1 int32 mult and n int32 add (weighted vertex sum)
// Per output sample of a stage:
//   int32 add   T - 1 to sum its T fused terms (rotations x branches)
//   requantize  1 int32 add + 1 int32 mult (rounding offset, division)
// Shifts, masks and border clamps are free.
//

#include <array>
#include <cstdint>
#include <iomanip>
#include <sstream>
#include <string>

#include "mulut/engine.hpp"
#include "mulut/pipeline.hpp"

namespace mulut {

enum class Op { kAdd = 0, kMult = 1 };
enum class Dtype { kInt8 = 0, kInt32 = 1, kFloat16 = 2, kFloat32 = 3 };

inline const char* to_string(Op o) { return o == Op::kAdd ? "add" : "mult"; }
inline const char* to_string(Dtype d) {
  switch (d) {
    case Dtype::kInt8: return "int8";
    case Dtype::kInt32: return "int32";
    case Dtype::kFloat16: return "float16";
    case Dtype::kFloat32: return "float32";
  }
  return "?";
}

/// Count per (dtype, op).
struct OpCounts {
  std::array<std::array<std::uint64_t, 2>, 4> n{};

  std::uint64_t& at(Dtype d, Op o) { return n[static_cast<std::size_t>(d)][static_cast<std::size_t>(o)]; }
  std::uint64_t at(Dtype d, Op o) const { return n[static_cast<std::size_t>(d)][static_cast<std::size_t>(o)]; }
  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (const auto& row : n)
      for (auto v : row) t += v;
    return t;
  }
  friend bool operator==(const OpCounts&, const OpCounts&) = default;
};

/// Picojoules per operation.
struct EnergyTable {
  std::array<std::array<double, 2>, 4> pj{{{0.03, 0.2}, {0.1, 3.1}, {0.4, 1.1}, {0.9, 3.7}}};

  double at(Dtype d, Op o) const { return pj[static_cast<std::size_t>(d)][static_cast<std::size_t>(o)]; }
  double& at(Dtype d, Op o) { return pj[static_cast<std::size_t>(d)][static_cast<std::size_t>(o)]; }
};

namespace detail {

inline void count_queries(OpCounts& c, std::uint64_t queries, int n, int m) {
  const auto un = static_cast<std::uint64_t>(n);
  const auto um = static_cast<std::uint64_t>(m);
  c.at(Dtype::kInt8, Op::kAdd) += queries * (un + un * (un - 1) / 2 + un);
  c.at(Dtype::kInt32, Op::kMult) += queries * ((un - 1) + um * (un + 1));
  c.at(Dtype::kInt32, Op::kAdd) += queries * ((un - 1) + un + um * un);
}

}  // namespace detail

/// Operations to run `spec` on a width x height input with `channels`
/// colour channels (0 picks the pipeline's natural input).
inline OpCounts count_ops(const PipelineSpec& spec, int width, int height, int channels = 0) {
  OpCounts c;
  if (spec.stages.empty()) return c;
  if (channels == 0) channels = spec.frontend != Frontend::kNone || spec.color_mode == ColorMode::kGrayscale ? 1 : 3;
  const detail::Plan plan = detail::compile_plan(spec, channels);
  int w = width, h = height;
  if (plan.deinterleave) {
    w /= 2;
    h /= 2;
  }
  for (const auto& step : plan.steps) {
    std::uint64_t out_values = 0;
    std::uint64_t fuse_adds = 0;
    if (step.kind == detail::Step::Kind::kSpatial) {
      const detail::StepGeometry g = detail::spatial_geometry(step, w, h);
      const auto anchors = static_cast<std::uint64_t>(g.anchors_w) * static_cast<std::uint64_t>(g.anchors_h);
      std::vector<std::uint64_t> terms(static_cast<std::size_t>(step.out_planes), 0);
      for (const auto& b : step.branches) {
        detail::count_queries(c, anchors * static_cast<std::uint64_t>(b.rotations), 4, b.upscale * b.upscale * b.out_channels);
        for (int ch = b.out_base; ch < b.out_base + b.out_channels; ++ch) terms[static_cast<std::size_t>(ch)] += static_cast<std::uint64_t>(b.rotations);
      }
      const auto plane = static_cast<std::uint64_t>(g.out_w) * static_cast<std::uint64_t>(g.out_h);
      for (auto t : terms) fuse_adds += plane * (t - 1);
      out_values = plane * static_cast<std::uint64_t>(step.out_planes);
      w = g.out_w;
      h = g.out_h;
    } else {
      const auto px = static_cast<std::uint64_t>(w) * static_cast<std::uint64_t>(h);
      detail::count_queries(c, px, 3, 3);
      out_values = px * 3;
    }
    c.at(Dtype::kInt32, Op::kAdd) += fuse_adds + out_values;
    c.at(Dtype::kInt32, Op::kMult) += out_values;
  }
  return c;
}

inline double estimate_energy(const OpCounts& counts, const EnergyTable& table = {}) {
  double e = 0.0;
  for (int d = 0; d < 4; ++d)
    for (int o = 0; o < 2; ++o)
      e += static_cast<double>(counts.at(static_cast<Dtype>(d), static_cast<Op>(o))) * table.at(static_cast<Dtype>(d), static_cast<Op>(o));
  return e;
}

/// `dtype,op,count,pj_per_op,pj` rows followed by a total row.
inline std::string cost_report_csv(const OpCounts& counts, const EnergyTable& table = {}) {
  std::ostringstream os;
  os << "dtype,op,count,pj_per_op,pj\n";
  for (int d = 0; d < 4; ++d)
    for (int o = 0; o < 2; ++o) {
      const auto dt = static_cast<Dtype>(d);
      const auto op = static_cast<Op>(o);
      os << to_string(dt) << ',' << to_string(op) << ',' << counts.at(dt, op) << ',' << table.at(dt, op) << ','
         << std::setprecision(12) << static_cast<double>(counts.at(dt, op)) * table.at(dt, op) << std::setprecision(6) << '\n';
    }
  os << "total,," << counts.total() << ",," << std::setprecision(12) << estimate_energy(counts, table) << '\n';
  return os.str();
}

inline std::string cost_report_table(const OpCounts& counts, const EnergyTable& table = {}) {
  std::ostringstream os;
  os << std::left << std::setw(9) << "dtype" << std::setw(6) << "op" << std::right << std::setw(16) << "count"
     << std::setw(10) << "pJ/op" << std::setw(18) << "energy (pJ)" << '\n';
  for (int d = 0; d < 4; ++d)
    for (int o = 0; o < 2; ++o) {
      const auto dt = static_cast<Dtype>(d);
      const auto op = static_cast<Op>(o);
      if (counts.at(dt, op) == 0) continue;
      os << std::left << std::setw(9) << to_string(dt) << std::setw(6) << to_string(op) << std::right << std::setw(16)
         << counts.at(dt, op) << std::setw(10) << table.at(dt, op) << std::setw(18) << std::fixed << std::setprecision(1)
         << static_cast<double>(counts.at(dt, op)) * table.at(dt, op) << std::defaultfloat << std::setprecision(6) << '\n';
    }
  const double e = estimate_energy(counts, table);
  os << "total " << std::fixed << std::setprecision(1) << e << " pJ (" << std::setprecision(2) << e / 1e6 << "M)\n";
  return os.str();
}

}  // namespace mulut
