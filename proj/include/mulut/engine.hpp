// SPDX-FileCopyrightText: © 2026 The mulut Authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

//
// LUT pipeline execution.
//
// Every stage output is an exact rational: integer numerators per sample and
// one denominator per output channel. A spatial stage with N parallel blocks
// under the four-way rotation ensemble has denominator W * 4 * N, so the
// 1/4 of the ensemble and the 1/N of branch fusion are folded into a single
// round-half-up division at requantization.
//
// The ensemble is evaluated without rotating images: processing the k-times
// rotated image with offset o and rotating back is the same as gathering at
// rotate_offset(o, k) in the original frame, with the r x r pixel-shuffle
// slots permuted accordingly. Border pixels are replicated.
//

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <thread>
#include <vector>

#include "mulut/error.hpp"
#include "mulut/image.hpp"
#include "mulut/interp.hpp"
#include "mulut/lut.hpp"
#include "mulut/pipeline.hpp"

namespace mulut {

/// Planar raster of exact rationals: numer[c][y][x] / denom[c].
struct RationalImage {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::int64_t> numer;
  std::vector<std::int64_t> denom;

  RationalImage() = default;
  RationalImage(int w, int h, int c, std::int64_t den = 1)
      : width(w), height(h), channels(c), numer(static_cast<std::size_t>(w) * h * c, 0), denom(static_cast<std::size_t>(c), den) {}

  std::size_t pixels() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
  std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * static_cast<std::size_t>(height) + static_cast<std::size_t>(y)) *
               static_cast<std::size_t>(width) +
           static_cast<std::size_t>(x);
  }
  double value(int c, int y, int x) const {
    return static_cast<double>(numer[index(c, y, x)]) / static_cast<double>(denom[static_cast<std::size_t>(c)]);
  }

  friend bool operator==(const RationalImage&, const RationalImage&) = default;
};

/// Exact round-half-up of numer / denom (denom > 0), clamped to [0, 255].
inline std::uint8_t round_clamp(std::int64_t numer, std::int64_t denom) {
  const std::int64_t twice = 2 * numer + denom;
  const std::int64_t d2 = 2 * denom;
  std::int64_t q = twice / d2;
  if (twice % d2 != 0 && twice < 0) --q;  // floor division
  return static_cast<std::uint8_t>(std::clamp<std::int64_t>(q, 0, 255));
}

/// Round-half-up then clamp; links cascaded stages and materializes outputs.
inline ImagePlane requantize(const RationalImage& img) {
  ImagePlane out(img.width, img.height, img.channels);
  for (int c = 0; c < img.channels; ++c) {
    const std::int64_t den = img.denom[static_cast<std::size_t>(c)];
    if (den <= 0) throw Error(Errc::kInvariant, "requantize: denominator must be positive");
    auto src = std::span(img.numer).subspan(static_cast<std::size_t>(c) * img.pixels(), img.pixels());
    auto dst = out.plane(c);
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = round_clamp(src[i], den);
  }
  return out;
}

/// Rational embedding of an 8-bit image (denominator 1).
inline RationalImage to_rational(const ImagePlane& img) {
  RationalImage r(img.width(), img.height(), img.channels(), 1);
  for (std::size_t i = 0; i < img.size(); ++i) r.numer[i] = img.data()[i];
  return r;
}

/// k counter-clockwise quarter turns of a rational raster.
inline RationalImage rot90(const RationalImage& img, int k) {
  k &= 3;
  RationalImage cur = img;
  for (int t = 0; t < k; ++t) {
    RationalImage next(cur.height, cur.width, cur.channels);
    next.denom = cur.denom;
    for (int c = 0; c < cur.channels; ++c)
      for (int i = 0; i < cur.width; ++i)
        for (int j = 0; j < cur.height; ++j) next.numer[next.index(c, i, j)] = cur.numer[cur.index(c, j, cur.width - 1 - i)];
    cur = std::move(next);
  }
  return cur;
}

/// V = (sum of branches) / N, kept exact. Branch denominators are brought to
/// their least common multiple first.
inline RationalImage fuse_parallel(std::span<const RationalImage> branches) {
  if (branches.empty()) throw Error(Errc::kGeometry, "fuse_parallel: no branches");
  const auto& first = branches.front();
  for (const auto& b : branches) {
    if (b.width != first.width || b.height != first.height || b.channels != first.channels) {
      throw Error(Errc::kGeometry, "fuse_parallel: branch geometry mismatch");
    }
  }
  RationalImage out(first.width, first.height, first.channels);
  for (int c = 0; c < first.channels; ++c) {
    std::int64_t l = 1;
    for (const auto& b : branches) l = std::lcm(l, b.denom[static_cast<std::size_t>(c)]);
    const std::size_t base = static_cast<std::size_t>(c) * first.pixels();
    for (const auto& b : branches) {
      const std::int64_t f = l / b.denom[static_cast<std::size_t>(c)];
      for (std::size_t i = 0; i < first.pixels(); ++i) out.numer[base + i] += b.numer[base + i] * f;
    }
    out.denom[static_cast<std::size_t>(c)] = l * static_cast<std::int64_t>(branches.size());
  }
  return out;
}

namespace detail {

/// Where a table sits inside a pipeline; `block` is -1 for channel tables.
struct TableRef {
  std::size_t stage = 0;
  int block = 0;
  int copy = 0;
  const LutTable* table = nullptr;
};

struct Branch {
  const LutTable* lut = nullptr;
  std::size_t slot = 0;  // index into Plan::tables
  int q = 4;
  std::array<Offset, 4> offsets{};
  int in_plane = 0;
  int out_base = 0;
  int out_channels = 1;
  int upscale = 1;
  int stride = 1;
  int rotations = 4;
};

struct Step {
  enum class Kind { kSpatial, kChannel } kind = Kind::kSpatial;
  std::vector<Branch> branches;  // spatial steps
  int out_planes = 1;
  const LutTable* channel_lut = nullptr;  // channel steps
  std::size_t channel_slot = 0;
  int channel_q = 4;
};

struct Plan {
  bool deinterleave = false;  // Bayer planes frontend
  int in_planes = 1;
  std::vector<Step> steps;
  std::vector<TableRef> tables;
};

/// Number of colour planes the spatial stages of `spec` see for an input
/// with `channels` channels.
inline int working_planes(const PipelineSpec& spec, int channels) {
  return spec.frontend != Frontend::kNone ? 3 : channels;
}

inline Plan compile_plan(const PipelineSpec& spec, int in_channels) {
  Plan plan;
  plan.deinterleave = spec.frontend == Frontend::kBayerPlanes;
  plan.in_planes = plan.deinterleave ? 4 : in_channels;
  int planes = plan.in_planes;
  auto add_table = [&](std::size_t stage, int block, int copy, const BlockSpec& b) {
    const LutTable* t = b.luts.size() > static_cast<std::size_t>(copy) ? b.luts[static_cast<std::size_t>(copy)].get() : nullptr;
    plan.tables.push_back(TableRef{stage, block, copy, t});
    return plan.tables.size() - 1;
  };

  for (std::size_t i = 0; i < spec.stages.size(); ++i) {
    const auto& st = spec.stages[i];
    if (!st.blocks.empty()) {
      Step step;
      step.kind = Step::Kind::kSpatial;
      const bool front = i == 0 && spec.frontend != Frontend::kNone;
      if (front) {
        const auto& b = st.blocks.front();
        const std::size_t slot = add_table(i, 0, 0, b);
        if (spec.frontend == Frontend::kBayerCells) {
          step.branches.push_back(Branch{plan.tables[slot].table, slot, b.q, b.pattern.offsets(), 0, 0, 3, 2, 2, 1});
        } else {
          static constexpr int kTarget[4] = {0, 1, 1, 2};  // R, G1, G2, B
          for (int p = 0; p < 4; ++p) {
            step.branches.push_back(Branch{plan.tables[slot].table, slot, b.q, b.pattern.offsets(), p, kTarget[p], 1, 2, 1, 4});
          }
        }
        step.out_planes = 3;
      } else {
        std::vector<std::vector<std::size_t>> slots(st.blocks.size());
        for (std::size_t j = 0; j < st.blocks.size(); ++j)
          for (int c = 0; c < st.blocks[j].copies; ++c) slots[j].push_back(add_table(i, static_cast<int>(j), c, st.blocks[j]));
        for (int c = 0; c < planes; ++c) {
          for (std::size_t j = 0; j < st.blocks.size(); ++j) {
            const auto& b = st.blocks[j];
            const std::size_t slot = b.copies > 1 ? slots[j][static_cast<std::size_t>(c)] : slots[j][0];
            step.branches.push_back(Branch{plan.tables[slot].table, slot, b.q, b.pattern.offsets(), c, c, 1, b.upscale, 1, 4});
          }
        }
        step.out_planes = planes;
      }
      planes = step.out_planes;
      plan.steps.push_back(std::move(step));
    }
    if (st.channel) {
      Step step;
      step.kind = Step::Kind::kChannel;
      step.channel_slot = add_table(i, -1, 0, *st.channel);
      step.channel_lut = plan.tables[step.channel_slot].table;
      step.channel_q = st.channel->q;
      step.out_planes = 3;
      plan.steps.push_back(std::move(step));
    }
  }
  return plan;
}

/// Output-raster offset of value slot v of a query, relative to the
/// anchor's top-left output pixel. Rotation k permutes the r x r slots.
inline std::vector<std::size_t> slot_offsets(const Branch& b, int k, int out_h, int out_w) {
  const int r = b.upscale;
  const int r2 = r * r;
  std::vector<std::size_t> rel(static_cast<std::size_t>(r2 * b.out_channels));
  for (int v = 0; v < r2 * b.out_channels; ++v) {
    const int c = v / r2;
    int a = (v % r2) / r;
    int bb = v % r;
    for (int t = 0; t < (k & 3); ++t) {
      const int na = bb;
      const int nb = r - 1 - a;
      a = na;
      bb = nb;
    }
    rel[static_cast<std::size_t>(v)] = (static_cast<std::size_t>(b.out_base + c) * static_cast<std::size_t>(out_h) +
                                        static_cast<std::size_t>(a)) *
                                           static_cast<std::size_t>(out_w) +
                                       static_cast<std::size_t>(bb);
  }
  return rel;
}

struct StepGeometry {
  int in_w = 0, in_h = 0;
  int anchors_w = 0, anchors_h = 0;
  int out_w = 0, out_h = 0;
  std::int64_t w_max = 1;
  std::vector<std::int64_t> denom;  // per output plane
};

inline StepGeometry spatial_geometry(const Step& step, int in_w, int in_h) {
  StepGeometry g;
  g.in_w = in_w;
  g.in_h = in_h;
  const auto& b0 = step.branches.front();
  if (b0.stride > 1 && (in_w % b0.stride != 0 || in_h % b0.stride != 0)) {
    throw Error(Errc::kGeometry, "Bayer frontend needs even image dimensions");
  }
  g.anchors_w = in_w / b0.stride;
  g.anchors_h = in_h / b0.stride;
  g.out_w = g.anchors_w * b0.upscale;
  g.out_h = g.anchors_h * b0.upscale;
  for (const auto& b : step.branches) g.w_max = std::max<std::int64_t>(g.w_max, std::int64_t{1} << b.q);
  std::vector<int> count(static_cast<std::size_t>(step.out_planes), 0);
  std::vector<int> rots(static_cast<std::size_t>(step.out_planes), 0);
  for (const auto& b : step.branches) {
    for (int c = b.out_base; c < b.out_base + b.out_channels; ++c) {
      ++count[static_cast<std::size_t>(c)];
      if (rots[static_cast<std::size_t>(c)] && rots[static_cast<std::size_t>(c)] != b.rotations) {
        throw Error(Errc::kInvariant, "branches fused into one channel disagree on the rotation ensemble");
      }
      rots[static_cast<std::size_t>(c)] = b.rotations;
    }
  }
  g.denom.resize(static_cast<std::size_t>(step.out_planes));
  for (int c = 0; c < step.out_planes; ++c) {
    if (count[static_cast<std::size_t>(c)] == 0) throw Error(Errc::kInvariant, "output channel without branch");
    g.denom[static_cast<std::size_t>(c)] = g.w_max * rots[static_cast<std::size_t>(c)] * count[static_cast<std::size_t>(c)];
  }
  return g;
}

inline int resolve_threads(int threads) {
  if (threads > 0) return threads;
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

/// Splits [0, rows) into contiguous bands, one per worker.
inline void parallel_rows(int rows, int threads, const std::function<void(int, int)>& fn) {
  threads = std::clamp(resolve_threads(threads), 1, std::max(rows, 1));
  if (threads == 1) {
    fn(0, rows);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) {
    const int y0 = rows * t / threads;
    const int y1 = rows * (t + 1) / threads;
    pool.emplace_back([&fn, y0, y1] { fn(y0, y1); });
  }
}

inline RationalImage run_spatial_step(const Step& step, const ImagePlane& in, int threads) {
  const StepGeometry g = spatial_geometry(step, in.width(), in.height());
  RationalImage out(g.out_w, g.out_h, step.out_planes);
  out.denom = g.denom;

  struct Prepared {
    const Branch* b;
    std::array<Offset, 4> offs;
    std::vector<std::size_t> rel;
    std::int64_t scale;
  };
  std::vector<Prepared> prepared;
  for (const auto& b : step.branches) {
    if (b.lut == nullptr) throw Error(Errc::kConfig, "pipeline has unbound LUT tables");
    if (b.lut->n() != 4 || b.lut->m() != b.upscale * b.upscale * b.out_channels) {
      throw Error(Errc::kGeometry, "spatial table shape does not match its block");
    }
    for (int k = 0; k < b.rotations; ++k) {
      Prepared p{&b, {}, slot_offsets(b, k, g.out_h, g.out_w), g.w_max >> b.q};
      for (std::size_t i = 0; i < 4; ++i) p.offs[i] = rotate_offset(b.offsets[i], k);
      prepared.push_back(std::move(p));
    }
  }

  parallel_rows(g.anchors_h, threads, [&](int y0, int y1) {
    std::array<std::uint8_t, 4> x4{};
    for (const auto& p : prepared) {
      const Branch& b = *p.b;
      const LutTable& lut = *b.lut;
      const auto plane = in.plane(b.in_plane);
      const int m = lut.m();
      const std::uint8_t* values = lut.data();
      for (int ay = y0; ay < y1; ++ay) {
        for (int ax = 0; ax < g.anchors_w; ++ax) {
          const int py = ay * b.stride;
          const int px = ax * b.stride;
          for (std::size_t i = 0; i < 4; ++i) {
            const int yy = std::clamp(py + p.offs[i].dy, 0, g.in_h - 1);
            const int xx = std::clamp(px + p.offs[i].dx, 0, g.in_w - 1);
            x4[i] = plane[static_cast<std::size_t>(yy) * static_cast<std::size_t>(g.in_w) + static_cast<std::size_t>(xx)];
          }
          const auto sx = locate_simplex<4>(lut.q(), lut.levels(), x4);
          const std::size_t base = static_cast<std::size_t>(ay * b.upscale) * static_cast<std::size_t>(g.out_w) +
                                   static_cast<std::size_t>(ax * b.upscale);
          for (int v = 0; v < m; ++v) {
            std::int64_t acc = 0;
            for (int k = 0; k <= 4; ++k)
              acc += static_cast<std::int64_t>(sx.weight[static_cast<std::size_t>(k)]) *
                     values[static_cast<std::size_t>(sx.vertex[static_cast<std::size_t>(k)]) * static_cast<std::size_t>(m) +
                            static_cast<std::size_t>(v)];
            out.numer[base + p.rel[static_cast<std::size_t>(v)]] += acc * p.scale;
          }
        }
      }
    }
  });
  return out;
}

inline RationalImage run_channel_step(const LutTable& lut, const ImagePlane& in, int threads) {
  if (in.channels() != 3) throw Error(Errc::kGeometry, "channel block needs a 3-channel image");
  if (lut.n() != 3 || lut.m() != 3) throw Error(Errc::kGeometry, "channel table must have n = 3, m = 3");
  RationalImage out(in.width(), in.height(), 3, std::int64_t{1} << lut.q());
  const std::size_t px = in.pixels();
  parallel_rows(in.height(), threads, [&](int y0, int y1) {
    for (std::size_t i = static_cast<std::size_t>(y0) * in.width(); i < static_cast<std::size_t>(y1) * in.width(); ++i) {
      const std::array<std::uint8_t, 3> x3{in.data()[i], in.data()[px + i], in.data()[2 * px + i]};
      const auto sx = locate_simplex<3>(lut.q(), lut.levels(), x3);
      for (int v = 0; v < 3; ++v) {
        std::int64_t acc = 0;
        for (int k = 0; k <= 3; ++k) acc += static_cast<std::int64_t>(sx.weight[static_cast<std::size_t>(k)]) * lut.at(sx.vertex[static_cast<std::size_t>(k)], v);
        out.numer[static_cast<std::size_t>(v) * px + i] = acc;
      }
    }
  });
  return out;
}

/// Splits an RGGB mosaic into its R, G1, G2, B half-resolution sub-planes.
inline ImagePlane deinterleave_bayer(const ImagePlane& mosaic) {
  if (mosaic.channels() != 1 || mosaic.width() % 2 || mosaic.height() % 2) {
    throw Error(Errc::kGeometry, "Bayer input must be single-channel with even dimensions");
  }
  ImagePlane out(mosaic.width() / 2, mosaic.height() / 2, 4);
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x) {
      out.at(0, y, x) = mosaic.at(0, 2 * y, 2 * x);
      out.at(1, y, x) = mosaic.at(0, 2 * y, 2 * x + 1);
      out.at(2, y, x) = mosaic.at(0, 2 * y + 1, 2 * x);
      out.at(3, y, x) = mosaic.at(0, 2 * y + 1, 2 * x + 1);
    }
  return out;
}

}  // namespace detail

/// One spatial block on a single-channel image, one orientation, no fusion.
/// The result has denominator W = 2^q and is upscaled by the block's r.
inline RationalImage apply_block(const ImagePlane& img, const BlockSpec& block, int copy = 0) {
  if (block.kind != BlockKind::kSpatial) throw Error(Errc::kGeometry, "apply_block: needs a spatial block");
  if (img.channels() != 1) throw Error(Errc::kGeometry, "apply_block: needs a single-channel image");
  if (block.luts.size() <= static_cast<std::size_t>(copy)) throw Error(Errc::kConfig, "apply_block: block has no table");
  detail::Step step;
  step.out_planes = block.out_channels;
  const LutTable* t = block.luts[static_cast<std::size_t>(copy)].get();
  step.branches.push_back(detail::Branch{t, 0, t->q(), block.pattern.offsets(), 0, 0, block.out_channels, block.upscale, 1, 1});
  return detail::run_spatial_step(step, img, 1);
}

/// (1/4) * sum_j R_j^-1(apply(R_j(img))), computed by literally rotating the
/// input and the (possibly upscaled) output.
inline RationalImage rotation_ensemble(const std::function<RationalImage(const ImagePlane&)>& apply,
                                       const ImagePlane& img) {
  std::vector<RationalImage> parts;
  for (int k = 0; k < 4; ++k) parts.push_back(rot90(apply(rot90(img, k)), 4 - k));
  for (const auto& p : parts) {
    if (p.width != parts.front().width || p.height != parts.front().height || p.denom != parts.front().denom) {
      throw Error(Errc::kInvariant, "rotation_ensemble: apply is not scale-consistent across rotations");
    }
  }
  RationalImage out = parts.front();
  for (std::size_t i = 1; i < parts.size(); ++i)
    for (std::size_t j = 0; j < out.numer.size(); ++j) out.numer[j] += parts[i].numer[j];
  for (auto& d : out.denom) d *= 4;
  return out;
}

/// Per-pixel 3D lookup over (R, G, B); denominator W.
inline RationalImage apply_channel_block(const ImagePlane& img, const BlockSpec& block) {
  if (block.kind != BlockKind::kChannel || block.luts.empty()) {
    throw Error(Errc::kGeometry, "apply_channel_block: needs a bound channel block");
  }
  return detail::run_channel_step(*block.luts.front(), img, 1);
}

/// Throws Errc::kGeometry when `img` cannot be fed to `spec`.
inline void check_input(const PipelineSpec& spec, const ImagePlane& img) {
  if (spec.frontend != Frontend::kNone) {
    if (img.channels() != 1) throw Error(Errc::kGeometry, "demosaic pipelines take a single-channel Bayer mosaic");
    if (img.width() % 2 || img.height() % 2) throw Error(Errc::kGeometry, "Bayer mosaic needs even dimensions");
    return;
  }
  switch (spec.color_mode) {
    case ColorMode::kGrayscale:
      if (img.channels() != 1) throw Error(Errc::kGeometry, "grayscale pipeline given a colour image");
      break;
    case ColorMode::kPerChannel:
      if (img.channels() != 1 && img.channels() != 3) throw Error(Errc::kGeometry, "expected 1 or 3 channels");
      break;
    case ColorMode::kPerChannelLut:
      if (img.channels() != 3) throw Error(Errc::kGeometry, "channel-LUT pipeline needs a 3-channel image");
      break;
  }
}

/// Runs every stage: rotation ensemble per block, parallel fusion, exact
/// requantization between stages and at the output. `threads` = 0 uses
/// all cores; the result does not depend on it.
inline ImagePlane run_pipeline(const PipelineSpec& spec, const ImagePlane& img, int threads = 0) {
  check_input(spec, img);
  if (!spec.bound()) throw Error(Errc::kConfig, "run_pipeline: pipeline has unbound LUT tables");
  const detail::Plan plan = detail::compile_plan(spec, img.channels());
  ImagePlane cur = plan.deinterleave ? detail::deinterleave_bayer(img) : img;
  for (const auto& step : plan.steps) {
    const RationalImage r = step.kind == detail::Step::Kind::kSpatial ? detail::run_spatial_step(step, cur, threads)
                                                                       : detail::run_channel_step(*step.channel_lut, cur, threads);
    cur = requantize(r);
  }
  return cur;
}

}  // namespace mulut
