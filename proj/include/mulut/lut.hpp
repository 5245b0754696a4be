// SPDX-FileCopyrightText: © 2026 The mulut Authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

//
// Sampled look-up tables and their on-disk container.
//
// A LutTable caches an n-input (n = 3 or 4) function of 8-bit pixels on a
// uniform grid with spacing 2^q. Each grid dimension has 2^(8-q)+1 levels
// running 0, 2^q, ..., 256; every entry stores m uint8 values. Entries are
// laid out row-major with the last index dimension fastest and the value
// channel innermost:
//
//   offset(i0..i{n-1}, v) = ((((i0 * L + i1) * L + i2) ...) * L + i{n-1}) * m + v
//
// Pattern describes which four pixels around an anchor feed a spatial (4D)
// table. Offsets are (dy, dx) and live in the lower-right quadrant; the
// rotation ensemble supplies the other three.
//
// MULUT1 container, little-endian, 64-byte header followed by the payload:
//
//   0..5   "MULUT1"
//   6      version (1)
//   7      role (0 spatial-intermediate, 1 spatial-output, 2 channel)
//   8      q
//   9      n
//   10..11 m (uint16)
//   12     upscale factor r
//   13     pattern id (ASCII, 0 for channel tables)
//   14..29 4 x (int8 dy, int8 dx), zero for channel tables
//   30..63 reserved, zero
//

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mulut/error.hpp"

namespace mulut {

inline constexpr int kMaxBits = 8;

/// Byte size of a table with interval 2^q, n index dimensions and m values
/// per entry: (2^(8-q)+1)^n * m. Throws Errc::kRange on bad arguments or
/// when the result does not fit in std::uintmax_t.
inline std::uintmax_t lut_size_bytes(int q, int n, std::uintmax_t m) {
  if (q < 0 || q > kMaxBits || n < 1 || m < 1) {
    throw Error(Errc::kRange, "lut_size_bytes: require 0 <= q <= 8, n >= 1, m >= 1");
  }
  const std::uintmax_t levels = (std::uintmax_t{1} << (kMaxBits - q)) + 1;
  std::uintmax_t size = m;
  for (int d = 0; d < n; ++d) {
    if (__builtin_mul_overflow(size, levels, &size)) {
      throw Error(Errc::kRange, "lut_size_bytes: size overflows uintmax_t");
    }
  }
  return size;
}

class SamplingGrid {
 public:
  constexpr SamplingGrid() = default;
  explicit SamplingGrid(int q) : q_(q) {
    if (q < 0 || q > kMaxBits) throw Error(Errc::kRange, "sampling interval exponent must be in [0, 8]");
  }

  constexpr int q() const { return q_; }
  constexpr int step() const { return 1 << q_; }
  constexpr int levels() const { return (1 << (kMaxBits - q_)) + 1; }
  constexpr int value(int i) const { return i << q_; }
  constexpr int cell(int x) const { return x >> q_; }
  constexpr int frac(int x) const { return x & ((1 << q_) - 1); }

  friend constexpr bool operator==(SamplingGrid, SamplingGrid) = default;

 private:
  int q_ = 4;
};

class LutTable {
 public:
  LutTable() = default;

  /// Zero-filled table.
  LutTable(int q, int n, int m) : grid_(q), n_(n), m_(m) {
    check_shape();
    values_.assign(static_cast<std::size_t>(lut_size_bytes(q, n, static_cast<std::uintmax_t>(m))), 0);
  }

  LutTable(int q, int n, int m, std::vector<std::uint8_t> values) : grid_(q), n_(n), m_(m), values_(std::move(values)) {
    check_shape();
    if (values_.size() != lut_size_bytes(q, n, static_cast<std::uintmax_t>(m))) {
      throw Error(Errc::kLengthMismatch, "LutTable: payload length does not match (2^(8-q)+1)^n * m");
    }
  }

  const SamplingGrid& grid() const { return grid_; }
  int q() const { return grid_.q(); }
  int n() const { return n_; }
  int m() const { return m_; }
  int levels() const { return grid_.levels(); }
  std::size_t entries() const { return values_.size() / static_cast<std::size_t>(m_); }

  std::span<const std::uint8_t> values() const { return values_; }
  std::span<std::uint8_t> values() { return values_; }
  const std::uint8_t* data() const { return values_.data(); }

  /// Entry stride of index dimension d.
  std::size_t stride(int d) const {
    std::size_t s = 1;
    for (int k = d + 1; k < n_; ++k) s *= static_cast<std::size_t>(levels());
    return s;
  }

  std::size_t entry_index(std::span<const int> idx) const {
    std::size_t e = 0;
    for (int d = 0; d < n_; ++d) e = e * static_cast<std::size_t>(levels()) + static_cast<std::size_t>(idx[d]);
    return e;
  }

  std::uint8_t at(std::size_t entry, int v) const { return values_[entry * static_cast<std::size_t>(m_) + v]; }
  std::uint8_t& at(std::size_t entry, int v) { return values_[entry * static_cast<std::size_t>(m_) + v]; }

  friend bool operator==(const LutTable&, const LutTable&) = default;

 private:
  void check_shape() const {
    if (n_ < 1 || n_ > 4) throw Error(Errc::kInvariant, "LutTable: n must be in [1, 4]");
    if (m_ < 1 || m_ > 0xffff) throw Error(Errc::kInvariant, "LutTable: m must be in [1, 65535]");
  }

  SamplingGrid grid_;
  int n_ = 4;
  int m_ = 1;
  std::vector<std::uint8_t> values_;
};

struct Offset {
  int dy = 0;
  int dx = 0;
  friend constexpr bool operator==(Offset, Offset) = default;
};

/// One quarter turn of an offset. Processing the image rotated by k quarter
/// turns (counter-clockwise, numpy rot90 convention) with offset o gathers
/// the pixel at rotate_offset(o, k) in the original frame.
constexpr Offset rotate_offset(Offset o, int k) {
  for (int i = 0; i < (k & 3); ++i) o = Offset{o.dx, -o.dy};
  return o;
}

class Pattern {
 public:
  Pattern() = default;
  Pattern(char id, std::array<Offset, 4> offsets) : id_(id), offsets_(offsets) { validate(); }

  char id() const { return id_; }
  const std::array<Offset, 4>& offsets() const { return offsets_; }

  /// Rows and columns of the minimal bounding box.
  std::pair<int, int> window() const {
    int h = 0, w = 0;
    for (auto o : offsets_) {
      h = std::max(h, o.dy + 1);
      w = std::max(w, o.dx + 1);
    }
    return {h, w};
  }

  /// Largest |offset| component; the per-side radius under the ensemble.
  int reach() const {
    int r = 0;
    for (auto o : offsets_) r = std::max({r, o.dy, o.dx});
    return r;
  }

  std::array<Offset, 4> rotated(int k) const {
    std::array<Offset, 4> out{};
    for (std::size_t i = 0; i < 4; ++i) out[i] = rotate_offset(offsets_[i], k);
    return out;
  }

  static bool valid_offsets(const std::array<Offset, 4>& offs) {
    if (!(offs[0] == Offset{0, 0})) return false;
    for (std::size_t i = 0; i < 4; ++i) {
      if (offs[i].dy < 0 || offs[i].dx < 0 || offs[i].dy > 127 || offs[i].dx > 127) return false;
      for (std::size_t j = i + 1; j < 4; ++j)
        if (offs[i] == offs[j]) return false;
    }
    return true;
  }

  friend bool operator==(const Pattern&, const Pattern&) = default;

 private:
  void validate() const {
    if (id_ <= ' ' || id_ > '~') throw Error(Errc::kInvariant, "Pattern: id must be a printable ASCII character");
    if (!valid_offsets(offsets_)) {
      throw Error(Errc::kInvariant,
                  std::string("Pattern ") + id_ + ": offsets must start at (0,0), be distinct and non-negative");
    }
  }

  char id_ = 'S';
  std::array<Offset, 4> offsets_{Offset{0, 0}, Offset{0, 1}, Offset{1, 0}, Offset{1, 1}};
};

namespace patterns {

inline Pattern S() { return Pattern('S', {Offset{0, 0}, Offset{0, 1}, Offset{1, 0}, Offset{1, 1}}); }
inline Pattern D() { return Pattern('D', {Offset{0, 0}, Offset{0, 2}, Offset{2, 0}, Offset{2, 2}}); }
inline Pattern Y() { return Pattern('Y', {Offset{0, 0}, Offset{1, 1}, Offset{1, 2}, Offset{2, 1}}); }
inline Pattern E() { return Pattern('E', {Offset{0, 0}, Offset{0, 3}, Offset{3, 0}, Offset{3, 3}}); }
inline Pattern H() { return Pattern('H', {Offset{0, 0}, Offset{2, 2}, Offset{2, 3}, Offset{3, 2}}); }
inline Pattern O() { return Pattern('O', {Offset{0, 0}, Offset{1, 3}, Offset{3, 1}, Offset{3, 3}}); }

inline std::optional<Pattern> builtin(char id) {
  switch (id) {
    case 'S': return S();
    case 'D': return D();
    case 'Y': return Y();
    case 'E': return E();
    case 'H': return H();
    case 'O': return O();
    default: return std::nullopt;
  }
}

}  // namespace patterns

enum class LutRole : std::uint8_t { kSpatialIntermediate = 0, kSpatialOutput = 1, kChannel = 2 };

struct LutFile {
  LutTable table;
  std::optional<Pattern> pattern;  // empty for channel tables
  LutRole role = LutRole::kSpatialIntermediate;
  int upscale = 1;

  friend bool operator==(const LutFile&, const LutFile&) = default;
};

inline constexpr std::size_t kHeaderBytes = 64;
inline constexpr std::uint8_t kFormatVersion = 1;
inline constexpr char kMagic[6] = {'M', 'U', 'L', 'U', 'T', '1'};

inline std::vector<std::uint8_t> write_lut(const LutTable& table, const std::optional<Pattern>& pattern, LutRole role,
                                           int upscale = 1) {
  if (upscale < 1 || upscale > 255) throw Error(Errc::kRange, "write_lut: upscale must be in [1, 255]");
  std::vector<std::uint8_t> out(kHeaderBytes, 0);
  std::memcpy(out.data(), kMagic, sizeof kMagic);
  out[6] = kFormatVersion;
  out[7] = static_cast<std::uint8_t>(role);
  out[8] = static_cast<std::uint8_t>(table.q());
  out[9] = static_cast<std::uint8_t>(table.n());
  out[10] = static_cast<std::uint8_t>(table.m() & 0xff);
  out[11] = static_cast<std::uint8_t>((table.m() >> 8) & 0xff);
  out[12] = static_cast<std::uint8_t>(upscale);
  if (pattern) {
    out[13] = static_cast<std::uint8_t>(pattern->id());
    for (std::size_t i = 0; i < 4; ++i) {
      out[14 + 2 * i] = static_cast<std::uint8_t>(static_cast<std::int8_t>(pattern->offsets()[i].dy));
      out[15 + 2 * i] = static_cast<std::uint8_t>(static_cast<std::int8_t>(pattern->offsets()[i].dx));
    }
  }
  out.insert(out.end(), table.values().begin(), table.values().end());
  return out;
}

inline LutFile read_lut(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw Error(Errc::kBadMagic, "read_lut: missing MULUT1 magic");
  }
  if (bytes.size() < kHeaderBytes) throw Error(Errc::kLengthMismatch, "read_lut: truncated header");
  if (bytes[6] != kFormatVersion) {
    throw Error(Errc::kVersion, "read_lut: unsupported version " + std::to_string(bytes[6]));
  }
  const int role = bytes[7];
  const int q = bytes[8];
  const int n = bytes[9];
  const int m = bytes[10] | (bytes[11] << 8);
  const int upscale = bytes[12];
  if (role > 2) throw Error(Errc::kInvariant, "read_lut: unknown role " + std::to_string(role));
  if (q > kMaxBits) throw Error(Errc::kInvariant, "read_lut: q out of range");
  if (n != 3 && n != 4) throw Error(Errc::kInvariant, "read_lut: n must be 3 or 4");
  if (m < 1) throw Error(Errc::kInvariant, "read_lut: m must be positive");
  if (upscale < 1) throw Error(Errc::kInvariant, "read_lut: upscale must be positive");
  for (std::size_t i = 30; i < kHeaderBytes; ++i) {
    if (bytes[i] != 0) throw Error(Errc::kInvariant, "read_lut: reserved header bytes must be zero");
  }

  LutFile file;
  file.role = static_cast<LutRole>(role);
  file.upscale = upscale;
  if (file.role == LutRole::kChannel) {
    if (n != 3 || upscale != 1) throw Error(Errc::kInvariant, "read_lut: channel tables must have n=3, r=1");
    for (std::size_t i = 13; i < 30; ++i) {
      if (bytes[i] != 0) throw Error(Errc::kInvariant, "read_lut: channel tables carry no pattern");
    }
  } else {
    if (n != 4) throw Error(Errc::kInvariant, "read_lut: spatial tables must have n=4");
    std::array<Offset, 4> offs{};
    for (std::size_t i = 0; i < 4; ++i) {
      offs[i] = Offset{static_cast<std::int8_t>(bytes[14 + 2 * i]), static_cast<std::int8_t>(bytes[15 + 2 * i])};
    }
    const char id = static_cast<char>(bytes[13]);
    if (id <= ' ' || id > '~' || !Pattern::valid_offsets(offs)) {
      throw Error(Errc::kInvariant, "read_lut: invalid pattern in header");
    }
    file.pattern = Pattern(id, offs);
  }

  const std::uintmax_t expected = lut_size_bytes(q, n, static_cast<std::uintmax_t>(m));
  if (bytes.size() - kHeaderBytes != expected) {
    throw Error(Errc::kLengthMismatch, "read_lut: payload has " + std::to_string(bytes.size() - kHeaderBytes) +
                                           " bytes, header implies " + std::to_string(expected));
  }
  file.table = LutTable(q, n, m, std::vector<std::uint8_t>(bytes.begin() + kHeaderBytes, bytes.end()));
  return file;
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kIo, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(Errc::kIo, "read failed: " + path.string());
  return bytes;
}

inline void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::kIo, "cannot create " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::kIo, "write failed: " + path.string());
}

inline LutFile load_lut(const std::filesystem::path& path) { return read_lut(read_file_bytes(path)); }

inline void save_lut(const std::filesystem::path& path, const LutFile& file) {
  write_file_bytes(path, write_lut(file.table, file.pattern, file.role, file.upscale));
}

}  // namespace mulut
