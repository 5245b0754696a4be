// SPDX-FileCopyrightText: © 2026 The mulut Authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

//
// LUT-aware finetuning: the stored table values are the parameters.
//
// Given the simplex chosen for a query, an interpolated value is linear in
// the table entries at the simplex vertices, so d out / d P_k = w_k / W,
// further scaled by 1 / (R * N) for the rotation ensemble and branch
// fusion. The simplex choice itself is frozen per forward pass.
// Requantization between stages is treated as identity on the backward
// pass; with respect to its coordinates the interpolant has slope
// (P_k - P_{k-1}) / W along the dimension stepped by e(k).
//
// Two forward modes share one implementation:
//   quantized   tables are round(clamp(shadow)), stage outputs are rounded
//               before re-indexing; matches run_pipeline exactly.
//   continuous  raw shadow values, real-valued coordinates, no rounding.
//               A smooth surrogate used to check gradients numerically.
//
// Parameters are updated with Adam in units of shadow / 255.
//

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mulut/engine.hpp"
#include "mulut/error.hpp"
#include "mulut/image.hpp"
#include "mulut/interp.hpp"
#include "mulut/lut.hpp"
#include "mulut/pipeline.hpp"

namespace mulut {

enum class ForwardMode { kQuantized, kContinuous };

struct TableShape {
  int q = 4;
  int n = 4;
  int m = 1;
  int levels() const { return (1 << (kMaxBits - q)) + 1; }
};

/// Trainable copy of every table in a pipeline plus Adam moments.
class FinetuneState {
 public:
  explicit FinetuneState(const PipelineSpec& spec) : refs_(detail::compile_plan(spec, 1).tables) {
    if (!spec.bound()) throw Error(Errc::kConfig, "finetune: pipeline has unbound LUT tables");
    for (const auto& r : refs_) {
      shapes_.push_back(TableShape{r.table->q(), r.table->n(), r.table->m()});
      shadow_.emplace_back(r.table->values().begin(), r.table->values().end());
    }
    m1_.reserve(shadow_.size());
    for (const auto& s : shadow_) {
      m1_.emplace_back(s.size(), 0.0);
      m2_.emplace_back(s.size(), 0.0);
    }
    refresh();
  }

  std::size_t tables() const { return shadow_.size(); }
  const TableShape& shape(std::size_t slot) const { return shapes_[slot]; }
  const detail::TableRef& ref(std::size_t slot) const { return refs_[slot]; }
  long step() const { return step_; }

  std::span<const double> shadow(std::size_t slot) const { return shadow_[slot]; }
  std::span<double> shadow(std::size_t slot) { return shadow_[slot]; }

  /// Values seen by the forward pass in the given mode.
  std::span<const double> lookup(std::size_t slot, ForwardMode mode) const {
    return mode == ForwardMode::kQuantized ? std::span<const double>(rounded_[slot]) : std::span<const double>(shadow_[slot]);
  }

  /// Recomputes the rounded view after shadow values were edited directly.
  void refresh() {
    rounded_.resize(shadow_.size());
    for (std::size_t s = 0; s < shadow_.size(); ++s) {
      rounded_[s].resize(shadow_[s].size());
      for (std::size_t i = 0; i < shadow_[s].size(); ++i) rounded_[s][i] = materialize_value(shadow_[s][i]);
    }
  }

  static std::uint8_t materialize_value(double v) {
    return static_cast<std::uint8_t>(std::floor(std::clamp(v, 0.0, 255.0) + 0.5));
  }

  LutTable materialize(std::size_t slot) const {
    std::vector<std::uint8_t> bytes(shadow_[slot].size());
    for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = materialize_value(shadow_[slot][i]);
    return LutTable(shapes_[slot].q, shapes_[slot].n, shapes_[slot].m, std::move(bytes));
  }

  /// Copy of `spec` bound to the materialized tables.
  PipelineSpec bind(PipelineSpec spec) const {
    for (std::size_t s = 0; s < refs_.size(); ++s) {
      const auto& r = refs_[s];
      auto& st = spec.stages[r.stage];
      BlockSpec& b = r.block < 0 ? *st.channel : st.blocks[static_cast<std::size_t>(r.block)];
      b.luts.resize(static_cast<std::size_t>(b.copies));
      b.luts[static_cast<std::size_t>(r.copy)] = std::make_shared<const LutTable>(materialize(s));
    }
    return spec;
  }

  /// One Adam step; `grad` is d loss / d shadow.
  void adam_step(const std::vector<std::vector<double>>& grad, double lr, double beta1 = 0.9, double beta2 = 0.999,
                 double eps = 1e-8) {
    ++step_;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step_));
    for (std::size_t s = 0; s < shadow_.size(); ++s) {
      for (std::size_t i = 0; i < shadow_[s].size(); ++i) {
        const double g = grad[s][i] * 255.0;
        m1_[s][i] = beta1 * m1_[s][i] + (1.0 - beta1) * g;
        m2_[s][i] = beta2 * m2_[s][i] + (1.0 - beta2) * g * g;
        const double theta = shadow_[s][i] / 255.0 - lr * (m1_[s][i] / c1) / (std::sqrt(m2_[s][i] / c2) + eps);
        shadow_[s][i] = std::clamp(theta * 255.0, 0.0, 255.0);
      }
    }
    refresh();
  }

  std::vector<std::vector<double>> zero_gradient() const {
    std::vector<std::vector<double>> g;
    for (const auto& s : shadow_) g.emplace_back(s.size(), 0.0);
    return g;
  }

 private:
  std::vector<detail::TableRef> refs_;
  std::vector<TableShape> shapes_;
  std::vector<std::vector<double>> shadow_;
  std::vector<std::vector<double>> rounded_;
  std::vector<std::vector<double>> m1_, m2_;
  long step_ = 0;
};

/// One table lookup recorded by the forward pass.
struct TapeQuery {
  std::uint32_t prep = 0;    // prepared branch/rotation within the step
  std::uint32_t anchor = 0;  // output sample of value slot 0 before the slot offset
  std::array<std::uint32_t, 5> vertex{};
  std::array<double, 5> weight{};  // sum == W
  std::array<std::uint8_t, 4> order{};
  std::array<std::uint32_t, 4> src{};  // input sample per index dimension
  std::uint8_t clamped = 0;            // bit d: coordinate d was clamped (continuous mode)
};

struct TapeBranch {
  std::size_t slot = 0;
  int n = 4;
  int m = 1;
  std::vector<std::size_t> rel;  // per value slot
  std::vector<double> inv_den;   // per value slot: 1 / (W * R * N)
};

struct TapeStep {
  std::size_t in_size = 0;
  std::size_t out_size = 0;
  std::vector<TapeBranch> branches;
  std::vector<TapeQuery> queries;
};

struct Tape {
  ForwardMode mode = ForwardMode::kQuantized;
  std::vector<TapeStep> steps;
};

struct ForwardOutput {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<double> value;  // final output before rounding
  ImagePlane rounded;         // quantized mode: equals run_pipeline
};

namespace detail {

template <int N>
struct RealSimplex {
  std::array<std::uint32_t, N + 1> vertex{};
  std::array<double, N + 1> weight{};
  std::array<std::uint8_t, N> order{};
};

/// Real-coordinate counterpart of locate_simplex, same tie rule.
template <int N>
inline RealSimplex<N> locate_real(int q, int levels, const std::array<double, N>& x) {
  const double w = static_cast<double>(1 << q);
  std::array<std::uint32_t, N> stride{};
  std::uint32_t s = 1;
  for (int d = N - 1; d >= 0; --d) {
    stride[static_cast<std::size_t>(d)] = s;
    s *= static_cast<std::uint32_t>(levels);
  }
  RealSimplex<N> out;
  std::array<double, N> frac{};
  std::uint32_t base = 0;
  for (int d = 0; d < N; ++d) {
    const int cell = std::min(static_cast<int>(std::floor(x[static_cast<std::size_t>(d)] / w)), levels - 2);
    base += static_cast<std::uint32_t>(cell) * stride[static_cast<std::size_t>(d)];
    frac[static_cast<std::size_t>(d)] = x[static_cast<std::size_t>(d)] - cell * w;
    out.order[static_cast<std::size_t>(d)] = static_cast<std::uint8_t>(d);
  }
  for (int i = 1; i < N; ++i) {
    const std::uint8_t key = out.order[static_cast<std::size_t>(i)];
    int j = i - 1;
    while (j >= 0 && frac[out.order[static_cast<std::size_t>(j)]] < frac[key]) {
      out.order[static_cast<std::size_t>(j + 1)] = out.order[static_cast<std::size_t>(j)];
      --j;
    }
    out.order[static_cast<std::size_t>(j + 1)] = key;
  }
  out.vertex[0] = base;
  out.weight[0] = w - frac[out.order[0]];
  for (int k = 1; k <= N; ++k) {
    out.vertex[static_cast<std::size_t>(k)] = out.vertex[static_cast<std::size_t>(k - 1)] + stride[out.order[static_cast<std::size_t>(k - 1)]];
    const double lo = k < N ? frac[out.order[static_cast<std::size_t>(k)]] : 0.0;
    out.weight[static_cast<std::size_t>(k)] = frac[out.order[static_cast<std::size_t>(k - 1)]] - lo;
  }
  return out;
}

template <int N>
inline void record_query(ForwardMode mode, const TableShape& shape, const std::array<double, N>& coords,
                         TapeQuery& tq) {
  if (mode == ForwardMode::kQuantized) {
    std::array<std::uint8_t, N> x{};
    for (std::size_t d = 0; d < N; ++d) x[d] = static_cast<std::uint8_t>(coords[d]);
    const auto sx = locate_simplex<N>(shape.q, shape.levels(), x);
    for (std::size_t k = 0; k <= N; ++k) {
      tq.vertex[k] = sx.vertex[k];
      tq.weight[k] = sx.weight[k];
    }
    for (std::size_t d = 0; d < N; ++d) tq.order[d] = sx.order[d];
  } else {
    const auto sx = locate_real<N>(shape.q, shape.levels(), coords);
    for (std::size_t k = 0; k <= N; ++k) {
      tq.vertex[k] = sx.vertex[k];
      tq.weight[k] = sx.weight[k];
    }
    for (std::size_t d = 0; d < N; ++d) tq.order[d] = sx.order[d];
  }
}

inline double coordinate(ForwardMode mode, double v, std::uint8_t& clamped, int d) {
  if (mode == ForwardMode::kQuantized) return v;
  if (v < 0.0 || v > 255.0) {
    clamped = static_cast<std::uint8_t>(clamped | (1u << d));
    return std::clamp(v, 0.0, 255.0);
  }
  return v;
}

}  // namespace detail

/// Evaluates the pipeline on `img` with the state's tables and records every
/// lookup in `tape` (when given).
inline ForwardOutput forward_with_tape(const PipelineSpec& spec, const FinetuneState& state, const ImagePlane& img,
                                       ForwardMode mode, Tape* tape = nullptr) {
  check_input(spec, img);
  const detail::Plan plan = detail::compile_plan(spec, img.channels());
  if (tape) {
    tape->mode = mode;
    tape->steps.clear();
  }
  const ImagePlane in = plan.deinterleave ? detail::deinterleave_bayer(img) : img;
  int w = in.width(), h = in.height(), c = in.channels();
  std::vector<double> cur(in.data().begin(), in.data().end());

  for (const auto& step : plan.steps) {
    TapeStep ts;
    ts.in_size = cur.size();
    std::vector<double> numer;
    std::vector<double> den;
    int ow = w, oh = h, oc = 3;
    if (step.kind == detail::Step::Kind::kSpatial) {
      const detail::StepGeometry g = detail::spatial_geometry(step, w, h);
      ow = g.out_w;
      oh = g.out_h;
      oc = step.out_planes;
      numer.assign(static_cast<std::size_t>(ow) * oh * oc, 0.0);
      den.assign(g.denom.begin(), g.denom.end());
      const std::size_t plane = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
      for (const auto& b : step.branches) {
        const TableShape& shape = state.shape(b.slot);
        const auto values = state.lookup(b.slot, mode);
        const std::int64_t scale = g.w_max >> b.q;
        for (int k = 0; k < b.rotations; ++k) {
          TapeBranch tb{b.slot, 4, shape.m, detail::slot_offsets(b, k, oh, ow), {}};
          tb.inv_den.resize(static_cast<std::size_t>(shape.m));
          for (int v = 0; v < shape.m; ++v) {
            const int ch = b.out_base + v / (b.upscale * b.upscale);
            tb.inv_den[static_cast<std::size_t>(v)] = static_cast<double>(scale) / static_cast<double>(g.denom[static_cast<std::size_t>(ch)]);
          }
          std::array<Offset, 4> offs{};
          for (std::size_t i = 0; i < 4; ++i) offs[i] = rotate_offset(b.offsets[i], k);
          const std::uint32_t prep = static_cast<std::uint32_t>(ts.branches.size());
          for (int ay = 0; ay < g.anchors_h; ++ay) {
            for (int ax = 0; ax < g.anchors_w; ++ax) {
              TapeQuery tq;
              tq.prep = prep;
              std::array<double, 4> x{};
              for (std::size_t i = 0; i < 4; ++i) {
                const int yy = std::clamp(ay * b.stride + offs[i].dy, 0, h - 1);
                const int xx = std::clamp(ax * b.stride + offs[i].dx, 0, w - 1);
                tq.src[i] = static_cast<std::uint32_t>(static_cast<std::size_t>(b.in_plane) * plane +
                                                       static_cast<std::size_t>(yy) * static_cast<std::size_t>(w) +
                                                       static_cast<std::size_t>(xx));
                x[i] = detail::coordinate(mode, cur[tq.src[i]], tq.clamped, static_cast<int>(i));
              }
              detail::record_query<4>(mode, shape, x, tq);
              tq.anchor = static_cast<std::uint32_t>(static_cast<std::size_t>(ay * b.upscale) * static_cast<std::size_t>(ow) +
                                                     static_cast<std::size_t>(ax * b.upscale));
              for (int v = 0; v < shape.m; ++v) {
                double acc = 0.0;
                for (std::size_t kk = 0; kk <= 4; ++kk)
                  acc += tq.weight[kk] * values[static_cast<std::size_t>(tq.vertex[kk]) * static_cast<std::size_t>(shape.m) + static_cast<std::size_t>(v)];
                numer[tq.anchor + tb.rel[static_cast<std::size_t>(v)]] += acc * static_cast<double>(scale);
              }
              if (tape) ts.queries.push_back(tq);
            }
          }
          ts.branches.push_back(std::move(tb));
        }
      }
    } else {
      if (c != 3) throw Error(Errc::kGeometry, "channel block needs a 3-channel image");
      const TableShape& shape = state.shape(step.channel_slot);
      const auto values = state.lookup(step.channel_slot, mode);
      const std::size_t px = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
      numer.assign(px * 3, 0.0);
      den.assign(3, static_cast<double>(1 << shape.q));
      TapeBranch tb{step.channel_slot, 3, 3, {0, px, 2 * px}, std::vector<double>(3, 1.0 / den[0])};
      for (std::size_t i = 0; i < px; ++i) {
        TapeQuery tq;
        std::array<double, 3> x{};
        for (std::size_t d = 0; d < 3; ++d) {
          tq.src[d] = static_cast<std::uint32_t>(d * px + i);
          x[d] = detail::coordinate(mode, cur[tq.src[d]], tq.clamped, static_cast<int>(d));
        }
        detail::record_query<3>(mode, shape, x, tq);
        tq.anchor = static_cast<std::uint32_t>(i);
        for (int v = 0; v < 3; ++v) {
          double acc = 0.0;
          for (std::size_t kk = 0; kk <= 3; ++kk) acc += tq.weight[kk] * values[static_cast<std::size_t>(tq.vertex[kk]) * 3 + static_cast<std::size_t>(v)];
          numer[tq.anchor + tb.rel[static_cast<std::size_t>(v)]] = acc;
        }
        if (tape) ts.queries.push_back(tq);
      }
      ts.branches.push_back(std::move(tb));
    }

    // Stage output: exact rational in quantized mode, so rounding matches the engine.
    const std::size_t plane_out = static_cast<std::size_t>(ow) * static_cast<std::size_t>(oh);
    std::vector<double> next(numer.size());
    for (std::size_t i = 0; i < numer.size(); ++i) next[i] = numer[i] / den[i / plane_out];
    ts.out_size = next.size();
    if (tape) tape->steps.push_back(std::move(ts));
    w = ow;
    h = oh;
    c = oc;
    const bool last = &step == &plan.steps.back();
    if (last) {
      ForwardOutput out{w, h, c, std::move(next), {}};
      if (mode == ForwardMode::kQuantized) {
        out.rounded = ImagePlane(w, h, c);
        for (std::size_t i = 0; i < numer.size(); ++i)
          out.rounded.data()[i] = round_clamp(static_cast<std::int64_t>(numer[i]), static_cast<std::int64_t>(den[i / plane_out]));
      }
      return out;
    }
    if (mode == ForwardMode::kQuantized) {
      for (std::size_t i = 0; i < numer.size(); ++i)
        next[i] = round_clamp(static_cast<std::int64_t>(numer[i]), static_cast<std::int64_t>(den[i / plane_out]));
    }
    cur = std::move(next);
  }
  throw Error(Errc::kConfig, "pipeline has no steps");
}

/// Accumulates d loss / d shadow into `grad` given d loss / d output.
/// Accumulation runs in tape order, so results are reproducible.
inline void backward(const Tape& tape, const FinetuneState& state, std::span<const double> grad_out,
                     std::vector<std::vector<double>>& grad) {
  if (tape.steps.empty()) return;
  if (grad_out.size() != tape.steps.back().out_size) throw Error(Errc::kGeometry, "backward: gradient size mismatch");
  std::vector<double> g(grad_out.begin(), grad_out.end());
  for (std::size_t si = tape.steps.size(); si-- > 0;) {
    const TapeStep& ts = tape.steps[si];
    const bool need_input = si > 0;
    std::vector<double> g_in(need_input ? ts.in_size : 0, 0.0);
    for (const auto& tq : ts.queries) {
      const TapeBranch& tb = ts.branches[tq.prep];
      const auto values = state.lookup(tb.slot, tape.mode);
      auto& gs = grad[tb.slot];
      const std::size_t m = static_cast<std::size_t>(tb.m);
      for (std::size_t v = 0; v < m; ++v) {
        const double gv = g[tq.anchor + tb.rel[v]] * tb.inv_den[v];
        if (gv == 0.0) continue;
        for (int k = 0; k <= tb.n; ++k) gs[static_cast<std::size_t>(tq.vertex[static_cast<std::size_t>(k)]) * m + v] += tq.weight[static_cast<std::size_t>(k)] * gv;
        if (!need_input) continue;
        for (int k = 1; k <= tb.n; ++k) {
          const int d = tq.order[static_cast<std::size_t>(k - 1)];
          if (tq.clamped & (1u << d)) continue;
          const double slope = values[static_cast<std::size_t>(tq.vertex[static_cast<std::size_t>(k)]) * m + v] -
                               values[static_cast<std::size_t>(tq.vertex[static_cast<std::size_t>(k - 1)]) * m + v];
          g_in[tq.src[static_cast<std::size_t>(d)]] += slope * gv;
        }
      }
    }
    g = std::move(g_in);
  }
}

/// Paired low-quality / high-quality images.
struct Sample {
  ImagePlane lq;
  ImagePlane hq;
};

struct FinetuneOptions {
  int iters = 2000;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int batch = 8;
  int patch = 48;  // low-quality patch side
  std::uint64_t seed = 0;
  int threads = 0;
};

struct FinetuneResult {
  std::vector<double> trace;  // loss per iteration, before its update
};

/// Output geometry of `spec` for a low-quality input; throws on mismatch.
inline void check_sample(const PipelineSpec& spec, const Sample& s) {
  check_input(spec, s.lq);
  const int want_c = spec.frontend != Frontend::kNone ? 3 : s.lq.channels();
  if (s.hq.width() != s.lq.width() * spec.scale || s.hq.height() != s.lq.height() * spec.scale || s.hq.channels() != want_c) {
    throw Error(Errc::kGeometry, "finetune: high-quality image geometry does not match input x scale");
  }
}

namespace detail {

inline ImagePlane crop(const ImagePlane& img, int x0, int y0, int w, int h) {
  ImagePlane out(w, h, img.channels());
  for (int c = 0; c < img.channels(); ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out.at(c, y, x) = img.at(c, y0 + y, x0 + x);
  return out;
}

}  // namespace detail

/// Mean squared error of the unrounded output over a batch, with its
/// gradient accumulated into `grad` (may be null).
inline double batch_loss(const PipelineSpec& spec, const FinetuneState& state, std::span<const Sample> batch,
                         ForwardMode mode, std::vector<std::vector<double>>* grad, int threads = 0) {
  std::vector<ForwardOutput> outs(batch.size());
  std::vector<Tape> tapes(grad ? batch.size() : 0);
  detail::parallel_rows(static_cast<int>(batch.size()), threads, [&](int i0, int i1) {
    for (int i = i0; i < i1; ++i) {
      outs[static_cast<std::size_t>(i)] =
          forward_with_tape(spec, state, batch[static_cast<std::size_t>(i)].lq, mode, grad ? &tapes[static_cast<std::size_t>(i)] : nullptr);
    }
  });
  std::size_t count = 0;
  for (const auto& s : batch) count += s.hq.size();
  double loss = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto hq = batch[i].hq.data();
    for (std::size_t j = 0; j < hq.size(); ++j) {
      const double e = outs[i].value[j] - hq[j];
      loss += e * e;
    }
  }
  loss /= static_cast<double>(count);
  if (grad) {
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto hq = batch[i].hq.data();
      std::vector<double> go(hq.size());
      for (std::size_t j = 0; j < hq.size(); ++j) go[j] = 2.0 * (outs[i].value[j] - hq[j]) / static_cast<double>(count);
      backward(tapes[i], state, go, *grad);
    }
  }
  return loss;
}

/// Adam on the shadow tables over random aligned patches of `data`.
inline FinetuneResult finetune(const PipelineSpec& spec, FinetuneState& state, std::span<const Sample> data,
                               const FinetuneOptions& opt) {
  if (data.empty()) throw Error(Errc::kConfig, "finetune: empty dataset");
  for (const auto& s : data) check_sample(spec, s);
  const int align = spec.frontend != Frontend::kNone ? 2 : 1;
  std::mt19937_64 rng(opt.seed);
  FinetuneResult res;
  res.trace.reserve(static_cast<std::size_t>(std::max(opt.iters, 0)));
  std::vector<Sample> batch;
  for (int it = 0; it < opt.iters; ++it) {
    batch.clear();
    for (int b = 0; b < opt.batch; ++b) {
      const Sample& s = data[rng() % data.size()];
      const int pw = std::min(opt.patch, s.lq.width()) / align * align;
      const int ph = std::min(opt.patch, s.lq.height()) / align * align;
      const int x0 = static_cast<int>(rng() % static_cast<std::uint64_t>((s.lq.width() - pw) / align + 1)) * align;
      const int y0 = static_cast<int>(rng() % static_cast<std::uint64_t>((s.lq.height() - ph) / align + 1)) * align;
      batch.push_back(Sample{detail::crop(s.lq, x0, y0, pw, ph),
                             detail::crop(s.hq, x0 * spec.scale, y0 * spec.scale, pw * spec.scale, ph * spec.scale)});
    }
    auto grad = state.zero_gradient();
    const double loss = batch_loss(spec, state, batch, ForwardMode::kQuantized, &grad, opt.threads);
    if (!std::isfinite(loss)) throw Error(Errc::kNumeric, "finetune: loss is not finite at iteration " + std::to_string(it + 1));
    res.trace.push_back(loss);
    state.adam_step(grad, opt.lr, opt.beta1, opt.beta2, opt.eps);
  }
  return res;
}

/// Mean squared error of the engine output (rounded) against the targets.
inline double dataset_mse(const PipelineSpec& bound_spec, std::span<const Sample> data, int threads = 0) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& s : data) {
    const ImagePlane out = run_pipeline(bound_spec, s.lq, threads);
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double e = static_cast<double>(out.data()[i]) - s.hq.data()[i];
      total += e * e;
    }
    count += out.size();
  }
  return total / static_cast<double>(count);
}

inline void write_trace_csv(const std::filesystem::path& path, std::span<const double> trace) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::kIo, "cannot create " + path.string());
  out << "iter,loss\n";
  out.precision(17);
  for (std::size_t i = 0; i < trace.size(); ++i) out << i + 1 << ',' << trace[i] << '\n';
  if (!out) throw Error(Errc::kIo, "write failed: " + path.string());
}

/// Writes every materialized table under its default name plus a
/// pipeline.cfg that references them.
inline void write_pipeline(const std::filesystem::path& dir, PipelineSpec spec) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < spec.stages.size(); ++i) {
    auto& st = spec.stages[i];
    auto save = [&](BlockSpec& b) {
      b.lut_paths.clear();
      for (int c = 0; c < b.copies; ++c) {
        const std::string name = default_lut_name(i, b, c);
        std::optional<Pattern> pat;
        if (b.kind == BlockKind::kSpatial) pat = b.pattern;
        save_lut(dir / name, LutFile{*b.luts[static_cast<std::size_t>(c)], pat, spec.role_of(i, b.kind), b.upscale});
        b.lut_paths.push_back(name);
      }
    };
    for (auto& b : st.blocks) save(b);
    if (st.channel) save(*st.channel);
  }
  const std::string text = serialize_config(spec);
  std::ofstream out(dir / "pipeline.cfg", std::ios::trunc);
  if (!out) throw Error(Errc::kIo, "cannot create " + (dir / "pipeline.cfg").string());
  out << text;
}

}  // namespace mulut
