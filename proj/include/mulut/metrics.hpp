// SPDX-FileCopyrightText: © 2026 The mulut Authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

//
// Image quality metrics and synthetic degradations.
//
// Conventions:
//   psnr     10 log10(255^2 / MSE) over all samples; +inf when MSE is 0.
//   cpsnr    10 log10(255^2 / mean of the three per-channel MSEs).
//   Y        BT.601, Y = 16 + (65.481 R + 128.553 G + 24.966 B) / 255.
//   ssim     11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03,
//            L = 255, mean over valid window positions and channels.
//   psnr_b   Yim-Bovik blocking effect factor on the test image with
//            block size B; MSE-B = MSE + BEF.
//   bicubic  Keys kernel a = -0.5, widened by the scale when shrinking,
//            symmetric border extension.
//

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mulut/error.hpp"
#include "mulut/image.hpp"

namespace mulut {

inline constexpr double kPeak = 255.0;

namespace detail {

inline void same_geometry(const ImagePlane& a, const ImagePlane& b, const char* who) {
  if (a.width() != b.width() || a.height() != b.height() || a.channels() != b.channels()) {
    throw Error(Errc::kGeometry, std::string(who) + ": images differ in geometry");
  }
}

inline double psnr_from_mse(double mse) {
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(kPeak * kPeak / mse);
}

inline double channel_mse(const ImagePlane& a, const ImagePlane& b, int c) {
  const auto pa = a.plane(c), pb = b.plane(c);
  double s = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const double d = static_cast<double>(pa[i]) - static_cast<double>(pb[i]);
    s += d * d;
  }
  return s / static_cast<double>(pa.size());
}

}  // namespace detail

inline double mse(const ImagePlane& a, const ImagePlane& b) {
  detail::same_geometry(a, b, "mse");
  double s = 0.0;
  for (int c = 0; c < a.channels(); ++c) s += detail::channel_mse(a, b, c);
  return s / a.channels();
}

inline double psnr(const ImagePlane& a, const ImagePlane& b) { return detail::psnr_from_mse(mse(a, b)); }

inline double cpsnr(const ImagePlane& a, const ImagePlane& b) {
  detail::same_geometry(a, b, "cpsnr");
  if (a.channels() != 3) throw Error(Errc::kGeometry, "cpsnr: needs 3-channel images");
  double s = 0.0;
  for (int c = 0; c < 3; ++c) s += detail::channel_mse(a, b, c);
  return detail::psnr_from_mse(s / 3.0);
}

inline double luma(double r, double g, double b) { return 16.0 + (65.481 * r + 128.553 * g + 24.966 * b) / 255.0; }

/// BT.601 luma, rounded half-up to 8 bits.
inline ImagePlane y_channel(const ImagePlane& img) {
  if (img.channels() == 1) return img;
  if (img.channels() != 3) throw Error(Errc::kGeometry, "y_channel: needs a 3-channel image");
  ImagePlane out(img.width(), img.height(), 1);
  const auto r = img.plane(0), g = img.plane(1), b = img.plane(2);
  for (std::size_t i = 0; i < img.pixels(); ++i) {
    out.data()[i] = static_cast<std::uint8_t>(std::clamp(std::floor(luma(r[i], g[i], b[i]) + 0.5), 0.0, 255.0));
  }
  return out;
}

namespace detail {

inline std::array<double, 11> gaussian_window() {
  std::array<double, 11> w{};
  double s = 0.0;
  for (int i = 0; i < 11; ++i) {
    const double d = i - 5;
    w[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
    s += w[static_cast<std::size_t>(i)];
  }
  for (auto& v : w) v /= s;
  return w;
}

// Separable 11x11 filtering, valid region only.
inline std::vector<double> filter_valid(const std::vector<double>& src, int w, int h) {
  const auto k = gaussian_window();
  const int ow = w - 10, oh = h - 10;
  std::vector<double> tmp(static_cast<std::size_t>(ow) * static_cast<std::size_t>(h));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < 11; ++i) s += k[static_cast<std::size_t>(i)] * src[static_cast<std::size_t>(y) * w + x + i];
      tmp[static_cast<std::size_t>(y) * ow + x] = s;
    }
  std::vector<double> out(static_cast<std::size_t>(ow) * static_cast<std::size_t>(oh));
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < 11; ++i) s += k[static_cast<std::size_t>(i)] * tmp[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  return out;
}

inline double ssim_plane(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b, int w, int h) {
  const double c1 = (0.01 * kPeak) * (0.01 * kPeak);
  const double c2 = (0.03 * kPeak) * (0.03 * kPeak);
  const std::size_t n = a.size();
  std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = a[i];
    y[i] = b[i];
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto mx = filter_valid(x, w, h), my = filter_valid(y, w, h);
  const auto sxx = filter_valid(xx, w, h), syy = filter_valid(yy, w, h), sxy = filter_valid(xy, w, h);
  double total = 0.0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double vx = sxx[i] - mx[i] * mx[i];
    const double vy = syy[i] - my[i] * my[i];
    const double cov = sxy[i] - mx[i] * my[i];
    total += ((2 * mx[i] * my[i] + c1) * (2 * cov + c2)) / ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
  }
  return total / static_cast<double>(mx.size());
}

}  // namespace detail

inline double ssim(const ImagePlane& a, const ImagePlane& b) {
  detail::same_geometry(a, b, "ssim");
  if (a.width() < 11 || a.height() < 11) throw Error(Errc::kGeometry, "ssim: images smaller than the 11x11 window");
  double s = 0.0;
  for (int c = 0; c < a.channels(); ++c) s += detail::ssim_plane(a.plane(c), b.plane(c), a.width(), a.height());
  return s / a.channels();
}

namespace detail {

// Blocking effect factor of one plane of the test image.
inline double bef_plane(std::span<const std::uint8_t> p, int w, int h, int block) {
  double db = 0.0, dbc = 0.0;
  double nhb = 0.0, nhbc = 0.0, nvb = 0.0, nvbc = 0.0;
  auto at = [&](int y, int x) { return static_cast<double>(p[static_cast<std::size_t>(y) * w + x]); };
  // Horizontal neighbour pairs (x, x+1) for every row.
  for (int x = 0; x + 1 < w; ++x) {
    const bool boundary = (x + 1) % block == 0;
    for (int y = 0; y < h; ++y) {
      const double d = at(y, x) - at(y, x + 1);
      if (boundary) {
        db += d * d;
        nhb += 1;
      } else {
        dbc += d * d;
        nhbc += 1;
      }
    }
  }
  for (int y = 0; y + 1 < h; ++y) {
    const bool boundary = (y + 1) % block == 0;
    for (int x = 0; x < w; ++x) {
      const double d = at(y, x) - at(y + 1, x);
      if (boundary) {
        db += d * d;
        nvb += 1;
      } else {
        dbc += d * d;
        nvbc += 1;
      }
    }
  }
  if (nhb + nvb == 0 || nhbc + nvbc == 0) return 0.0;
  const double mean_b = db / (nhb + nvb);
  const double mean_bc = dbc / (nhbc + nvbc);
  if (mean_b <= mean_bc) return 0.0;
  const double eta = std::log2(static_cast<double>(block)) / std::log2(static_cast<double>(std::min(w, h)));
  return eta * (mean_b - mean_bc);
}

}  // namespace detail

/// Blocking effect factor of `img` (mean over channels).
inline double blocking_effect_factor(const ImagePlane& img, int block = 8) {
  if (block < 2) throw Error(Errc::kRange, "psnr_b: block size must be >= 2");
  double s = 0.0;
  for (int c = 0; c < img.channels(); ++c) s += detail::bef_plane(img.plane(c), img.width(), img.height(), block);
  return s / img.channels();
}

/// PSNR-B of `test` against `reference`. Channels are scored separately and
/// their MSE-B values averaged.
inline double psnr_b(const ImagePlane& reference, const ImagePlane& test, int block = 8) {
  detail::same_geometry(reference, test, "psnr_b");
  if (block < 2) throw Error(Errc::kRange, "psnr_b: block size must be >= 2");
  double s = 0.0;
  for (int c = 0; c < test.channels(); ++c) {
    s += detail::channel_mse(reference, test, c) +
         detail::bef_plane(test.plane(c), test.width(), test.height(), block);
  }
  return detail::psnr_from_mse(s / test.channels());
}

// ---------------------------------------------------------------------------
// Degradations

namespace detail {

inline double keys(double x) {
  constexpr double a = -0.5;
  x = std::abs(x);
  if (x <= 1.0) return (a + 2) * x * x * x - (a + 3) * x * x + 1;
  if (x < 2.0) return a * x * x * x - 5 * a * x * x + 8 * a * x - 4 * a;
  return 0.0;
}

inline int reflect(int i, int n) {
  // symmetric: ... 1 0 | 0 1 ... n-1 | n-1 n-2 ...
  const int period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

struct Taps {
  std::vector<int> index;
  std::vector<double> weight;
  int count = 0;
};

// Resampling taps for one axis, output length out_n = in_n / r (r > 0) or in_n * f.
inline Taps resample_taps(int in_n, int out_n, double scale) {
  Taps t;
  const double width = scale < 1.0 ? 4.0 / scale : 4.0;
  t.count = static_cast<int>(std::ceil(width)) + 2;
  t.index.resize(static_cast<std::size_t>(out_n) * t.count);
  t.weight.resize(static_cast<std::size_t>(out_n) * t.count);
  for (int o = 0; o < out_n; ++o) {
    const double u = (o + 1) / scale + 0.5 * (1.0 - 1.0 / scale);  // 1-based source coordinate
    const int left = static_cast<int>(std::floor(u - width / 2.0));
    double sum = 0.0;
    for (int k = 0; k < t.count; ++k) {
      const int j = left + k;
      const double d = u - j;
      const double w = scale < 1.0 ? scale * keys(scale * d) : keys(d);
      t.index[static_cast<std::size_t>(o) * t.count + k] = reflect(j - 1, in_n);
      t.weight[static_cast<std::size_t>(o) * t.count + k] = w;
      sum += w;
    }
    for (int k = 0; k < t.count; ++k) t.weight[static_cast<std::size_t>(o) * t.count + k] /= sum;
  }
  return t;
}

}  // namespace detail

/// Bicubic resize by `scale` (< 1 shrinks) to the given size.
inline ImagePlane bicubic_resize(const ImagePlane& img, int out_w, int out_h, double scale) {
  const auto tx = detail::resample_taps(img.width(), out_w, scale);
  const auto ty = detail::resample_taps(img.height(), out_h, scale);
  ImagePlane out(out_w, out_h, img.channels());
  std::vector<double> tmp(static_cast<std::size_t>(out_w) * img.height());
  for (int c = 0; c < img.channels(); ++c) {
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < out_w; ++x) {
        double s = 0.0;
        for (int k = 0; k < tx.count; ++k) {
          const std::size_t t = static_cast<std::size_t>(x) * tx.count + k;
          s += tx.weight[t] * img.at(c, y, tx.index[t]);
        }
        tmp[static_cast<std::size_t>(y) * out_w + x] = s;
      }
    for (int y = 0; y < out_h; ++y)
      for (int x = 0; x < out_w; ++x) {
        double s = 0.0;
        for (int k = 0; k < ty.count; ++k) {
          const std::size_t t = static_cast<std::size_t>(y) * ty.count + k;
          s += ty.weight[t] * tmp[static_cast<std::size_t>(ty.index[t]) * out_w + x];
        }
        out.at(c, y, x) = static_cast<std::uint8_t>(std::clamp(std::floor(s + 0.5), 0.0, 255.0));
      }
  }
  return out;
}

/// Crops to a multiple of r, then shrinks by r. r = 1 is the identity.
inline ImagePlane bicubic_down(const ImagePlane& img, int r) {
  if (r < 1) throw Error(Errc::kRange, "bicubic: scale must be >= 1");
  const int w = img.width() / r * r, h = img.height() / r * r;
  if (w == 0 || h == 0) throw Error(Errc::kGeometry, "bicubic: image smaller than the scale");
  ImagePlane cropped(w, h, img.channels());
  for (int c = 0; c < img.channels(); ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) cropped.at(c, y, x) = img.at(c, y, x);
  if (r == 1) return cropped;
  return bicubic_resize(cropped, w / r, h / r, 1.0 / r);
}

/// Additive white Gaussian noise, rounded half-up and clamped.
inline ImagePlane add_awgn(const ImagePlane& img, double sigma, std::uint64_t seed) {
  if (sigma < 0) throw Error(Errc::kRange, "awgn: sigma must be >= 0");
  ImagePlane out = img;
  if (sigma == 0) return out;
  std::mt19937_64 rng(seed);
  auto uniform = [&] { return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53; };
  double spare = 0.0;
  bool have_spare = false;
  for (auto& v : out.data()) {
    double z;
    if (have_spare) {
      z = spare;
      have_spare = false;
    } else {
      const double u1 = uniform(), u2 = uniform();
      const double rad = std::sqrt(-2.0 * std::log(u1));
      z = rad * std::cos(2.0 * std::numbers::pi * u2);
      spare = rad * std::sin(2.0 * std::numbers::pi * u2);
      have_spare = true;
    }
    v = static_cast<std::uint8_t>(std::clamp(std::floor(v + sigma * z + 0.5), 0.0, 255.0));
  }
  return out;
}

/// RGGB colour index of pixel (y, x): 0 = R, 1 = G, 2 = B.
inline int bayer_color(int y, int x) { return (y & 1) + (x & 1); }

/// Single-channel RGGB mosaic of a 3-channel image.
inline ImagePlane bayer_mosaic(const ImagePlane& rgb) {
  if (rgb.channels() != 3) throw Error(Errc::kGeometry, "bayer: needs a 3-channel image");
  ImagePlane out(rgb.width(), rgb.height(), 1);
  for (int y = 0; y < rgb.height(); ++y)
    for (int x = 0; x < rgb.width(); ++x) out.at(0, y, x) = rgb.at(bayer_color(y, x), y, x);
  return out;
}

/// 3-channel image keeping only the sample of each site's RGGB colour.
inline ImagePlane bayer_mask(const ImagePlane& rgb) {
  if (rgb.channels() != 3) throw Error(Errc::kGeometry, "bayer: needs a 3-channel image");
  ImagePlane out(rgb.width(), rgb.height(), 3);
  for (int y = 0; y < rgb.height(); ++y)
    for (int x = 0; x < rgb.width(); ++x) {
      const int c = bayer_color(y, x);
      out.at(c, y, x) = rgb.at(c, y, x);
    }
  return out;
}

enum class DegradeKind { kBicubic, kAwgn, kBayer };

struct Degradation {
  DegradeKind kind = DegradeKind::kBicubic;
  int scale = 2;
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

inline ImagePlane degrade(const ImagePlane& img, const Degradation& d) {
  switch (d.kind) {
    case DegradeKind::kBicubic: return bicubic_down(img, d.scale);
    case DegradeKind::kAwgn: return add_awgn(img, d.sigma, d.seed);
    case DegradeKind::kBayer: return bayer_mosaic(img);
  }
  throw Error(Errc::kConfig, "unknown degradation");
}

}  // namespace mulut
