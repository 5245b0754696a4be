// SPDX-FileCopyrightText: © 2026 The mulut Authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace mulut {

enum class Errc {
  kRange,           // arithmetic overflow or argument out of range
  kBadMagic,        // MULUT1 magic missing
  kVersion,         // unknown container version
  kLengthMismatch,  // header and payload length disagree
  kInvariant,       // decoded data violates a type invariant
  kConfig,          // pipeline configuration error
  kGeometry,        // image / pipeline shape mismatch
  kIo,              // file system failure
  kNumeric,         // NaN or divergence during optimisation
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::kRange: return "range";
    case Errc::kBadMagic: return "bad-magic";
    case Errc::kVersion: return "version";
    case Errc::kLengthMismatch: return "length-mismatch";
    case Errc::kInvariant: return "invariant";
    case Errc::kConfig: return "config";
    case Errc::kGeometry: return "geometry";
    case Errc::kIo: return "io";
    case Errc::kNumeric: return "numeric";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace mulut
