// SPDX-FileCopyrightText: © 2026 The mulut Authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "mulut/error.hpp"

namespace mulut {

/// 8-bit planar raster, row-major within each channel.
class ImagePlane {
 public:
  ImagePlane() = default;
  ImagePlane(int width, int height, int channels, std::uint8_t fill = 0)
      : width_(width), height_(height), channels_(channels) {
    check();
    data_.assign(size(), fill);
  }
  ImagePlane(int width, int height, int channels, std::vector<std::uint8_t> data)
      : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
    check();
    if (data_.size() != size()) throw Error(Errc::kGeometry, "ImagePlane: data length != width*height*channels");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  std::size_t pixels() const { return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_); }
  std::size_t size() const { return pixels() * static_cast<std::size_t>(channels_); }

  std::uint8_t at(int c, int y, int x) const { return data_[index(c, y, x)]; }
  std::uint8_t& at(int c, int y, int x) { return data_[index(c, y, x)]; }

  std::span<const std::uint8_t> plane(int c) const { return {data_.data() + c * pixels(), pixels()}; }
  std::span<std::uint8_t> plane(int c) { return {data_.data() + c * pixels(), pixels()}; }

  std::span<const std::uint8_t> data() const { return data_; }
  std::span<std::uint8_t> data() { return data_; }

  std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * static_cast<std::size_t>(height_) + static_cast<std::size_t>(y)) *
               static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  friend bool operator==(const ImagePlane&, const ImagePlane&) = default;

 private:
  void check() const {
    if (width_ < 1 || height_ < 1) throw Error(Errc::kGeometry, "ImagePlane: empty geometry");
    if (channels_ != 1 && channels_ != 3 && channels_ != 4) {
      throw Error(Errc::kGeometry, "ImagePlane: channels must be 1 or 3 (4 for Bayer sub-planes)");
    }
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<std::uint8_t> data_;
};

/// k counter-clockwise quarter turns (numpy.rot90 semantics).
inline ImagePlane rot90(const ImagePlane& img, int k) {
  k &= 3;
  if (k == 0) return img;
  ImagePlane cur = img;
  for (int t = 0; t < k; ++t) {
    const int w = cur.width(), h = cur.height();
    ImagePlane next(h, w, cur.channels());
    for (int c = 0; c < cur.channels(); ++c)
      for (int i = 0; i < w; ++i)
        for (int j = 0; j < h; ++j) next.at(c, i, j) = cur.at(c, j, w - 1 - i);
    cur = std::move(next);
  }
  return cur;
}

inline ImagePlane extract_channel(const ImagePlane& img, int c) {
  ImagePlane out(img.width(), img.height(), 1);
  std::copy(img.plane(c).begin(), img.plane(c).end(), out.data().begin());
  return out;
}

namespace detail {

inline void skip_pnm_space(std::istream& in) {
  for (;;) {
    const int ch = in.peek();
    if (ch == '#') {
      std::string line;
      std::getline(in, line);
    } else if (ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r') {
      in.get();
    } else {
      return;
    }
  }
}

inline int read_pnm_int(std::istream& in, const std::string& what) {
  skip_pnm_space(in);
  int v = -1;
  if (!(in >> v) || v < 0) throw Error(Errc::kIo, "malformed PNM header (" + what + ")");
  return v;
}

}  // namespace detail

/// Binary PGM (P5) or PPM (P6), maxval 255.
inline ImagePlane read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kIo, "cannot open " + path.string());
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (!in || magic[0] != 'P' || (magic[1] != '5' && magic[1] != '6')) {
    throw Error(Errc::kIo, path.string() + ": not a binary PGM/PPM file");
  }
  const int channels = magic[1] == '5' ? 1 : 3;
  const int w = detail::read_pnm_int(in, "width");
  const int h = detail::read_pnm_int(in, "height");
  const int maxval = detail::read_pnm_int(in, "maxval");
  if (maxval != 255) throw Error(Errc::kIo, path.string() + ": only maxval 255 is supported");
  in.get();  // single whitespace after maxval
  if (w < 1 || h < 1) throw Error(Errc::kIo, path.string() + ": empty image");
  std::vector<std::uint8_t> interleaved(static_cast<std::size_t>(w) * h * channels);
  in.read(reinterpret_cast<char*>(interleaved.data()), static_cast<std::streamsize>(interleaved.size()));
  if (in.gcount() != static_cast<std::streamsize>(interleaved.size())) {
    throw Error(Errc::kIo, path.string() + ": truncated pixel data");
  }
  ImagePlane img(w, h, channels);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < channels; ++c)
        img.at(c, y, x) = interleaved[(static_cast<std::size_t>(y) * w + x) * channels + c];
  return img;
}

inline void write_pnm(const std::filesystem::path& path, const ImagePlane& img) {
  if (img.channels() != 1 && img.channels() != 3) throw Error(Errc::kGeometry, "write_pnm: need 1 or 3 channels");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::kIo, "cannot create " + path.string());
  out << (img.channels() == 1 ? "P5" : "P6") << '\n' << img.width() << ' ' << img.height() << "\n255\n";
  std::vector<std::uint8_t> interleaved(img.size());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < img.channels(); ++c)
        interleaved[(static_cast<std::size_t>(y) * img.width() + x) * img.channels() + c] = img.at(c, y, x);
  out.write(reinterpret_cast<const char*>(interleaved.data()), static_cast<std::streamsize>(interleaved.size()));
  if (!out) throw Error(Errc::kIo, "write failed: " + path.string());
}

}  // namespace mulut
