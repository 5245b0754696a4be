// SPDX-FileCopyrightText: © 2026 The mulut Authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

//
// Pipeline descriptions: staged graphs of spatial (4D) and channel (3D) LUT
// blocks, the named presets, and a small line-oriented configuration format.
//
//   # MuLUT-SDY-X2, x4 super-resolution
//   task = sr
//   scale = 4
//   color_mode = grayscale
//   q = 4
//   [stage]
//   blocks = S D Y
//   luts = s1_S.mlut s1_D.mlut s1_Y.mlut
//   upscale = 1
//   [stage]
//   blocks = S D Y
//   luts = s2_S.mlut s2_D.mlut s2_Y.mlut
//   upscale = 4
//
// `blocks` lists pattern ids; a trailing `channel` token adds a channel
// block after the stage. `luts` is optional (an unbound spec still supports
// size and cost accounting). With color_mode = per-channel+channel-LUT each
// spatial block owns one table per colour channel and `luts` lists them block
// by block (S_r S_g S_b D_r ...), the channel table last. Relative paths are
// resolved against the config file's directory.
//
// A document may instead name a preset: `preset = MuLUT-SDY-X2`, `scale = 4`,
// optionally `q` and `lut_dir` (tables found by default_lut_name()).
//

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "mulut/error.hpp"
#include "mulut/lut.hpp"

namespace mulut {

enum class Task { kSr, kDenoise, kDeblock, kDemosaic, kCustom };
enum class ColorMode { kGrayscale, kPerChannel, kPerChannelLut };
enum class BlockKind { kSpatial, kChannel };

/// How a demosaic pipeline reads the Bayer mosaic in its first stage.
enum class Frontend {
  kNone,
  kBayerCells,   // 2x2 RGGB cells at stride 2 -> 2x2x3 patch per cell
  kBayerPlanes,  // four half-resolution sub-planes, each upscaled x2; greens averaged
};

inline const char* to_string(Task t) {
  switch (t) {
    case Task::kSr: return "sr";
    case Task::kDenoise: return "denoise";
    case Task::kDeblock: return "deblock";
    case Task::kDemosaic: return "demosaic";
    case Task::kCustom: return "custom";
  }
  return "custom";
}

inline const char* to_string(ColorMode c) {
  switch (c) {
    case ColorMode::kGrayscale: return "grayscale";
    case ColorMode::kPerChannel: return "per-channel";
    case ColorMode::kPerChannelLut: return "per-channel+channel-LUT";
  }
  return "grayscale";
}

inline const char* to_string(Frontend f) {
  switch (f) {
    case Frontend::kNone: return "none";
    case Frontend::kBayerCells: return "cells";
    case Frontend::kBayerPlanes: return "planes";
  }
  return "none";
}

struct BlockSpec {
  BlockKind kind = BlockKind::kSpatial;
  Pattern pattern;        // spatial blocks only
  int upscale = 1;        // pixel-shuffle factor r
  int out_channels = 1;   // values per entry m = r^2 * out_channels
  int q = 4;
  int copies = 1;         // 3 when every colour channel owns a table
  std::vector<std::string> lut_paths;
  std::vector<std::shared_ptr<const LutTable>> luts;

  int n() const { return kind == BlockKind::kSpatial ? 4 : 3; }
  int m() const { return upscale * upscale * out_channels; }
  std::uintmax_t payload_bytes() const {
    return static_cast<std::uintmax_t>(copies) * lut_size_bytes(q, n(), static_cast<std::uintmax_t>(m()));
  }
  bool bound() const { return luts.size() == static_cast<std::size_t>(copies); }

  static BlockSpec spatial(const Pattern& p, int upscale = 1, int out_channels = 1, int q = 4, int copies = 1) {
    BlockSpec b;
    b.pattern = p;
    b.upscale = upscale;
    b.out_channels = out_channels;
    b.q = q;
    b.copies = copies;
    return b;
  }
  static BlockSpec channel(int q = 4) {
    BlockSpec b;
    b.kind = BlockKind::kChannel;
    b.out_channels = 3;
    b.q = q;
    return b;
  }

  // Structural equality; bound tables are not compared.
  friend bool operator==(const BlockSpec& a, const BlockSpec& b) {
    const bool pattern_eq = a.kind == BlockKind::kChannel || a.pattern == b.pattern;
    return a.kind == b.kind && pattern_eq && a.upscale == b.upscale && a.out_channels == b.out_channels &&
           a.q == b.q && a.copies == b.copies && a.lut_paths == b.lut_paths;
  }
};

struct StageSpec {
  std::vector<BlockSpec> blocks;   // parallel spatial blocks
  std::optional<BlockSpec> channel;  // trailing channel block

  int upscale() const { return blocks.empty() ? 1 : blocks.front().upscale; }
  friend bool operator==(const StageSpec&, const StageSpec&) = default;
};

struct PipelineSpec {
  std::string name = "custom";
  Task task = Task::kCustom;
  int scale = 1;  // output size / input size
  ColorMode color_mode = ColorMode::kGrayscale;
  Frontend frontend = Frontend::kNone;
  std::vector<StageSpec> stages;

  std::uintmax_t payload_bytes() const {
    std::uintmax_t total = 0;
    for (const auto& s : stages) {
      for (const auto& b : s.blocks) total += b.payload_bytes();
      if (s.channel) total += s.channel->payload_bytes();
    }
    return total;
  }

  bool bound() const {
    for (const auto& s : stages) {
      for (const auto& b : s.blocks)
        if (!b.bound()) return false;
      if (s.channel && !s.channel->bound()) return false;
    }
    return true;
  }

  /// Side of the square receptive field in input pixels. Under the rotation
  /// ensemble a stage reaches `reach` pixels on every side; radii add up
  /// along the cascade. A Bayer frontend stage counts as radius 1.
  int receptive_field() const {
    int radius = 0;
    for (std::size_t i = 0; i < stages.size(); ++i) {
      if (i == 0 && frontend != Frontend::kNone) {
        radius += 1;
        continue;
      }
      int r = 0;
      for (const auto& b : stages[i].blocks) r = std::max(r, b.pattern.reach());
      radius += r;
    }
    return 2 * radius + 1;
  }

  /// Index of the last stage holding spatial blocks; its tables carry the
  /// spatial-output role.
  int output_stage() const {
    for (int i = static_cast<int>(stages.size()) - 1; i >= 0; --i)
      if (!stages[static_cast<std::size_t>(i)].blocks.empty()) return i;
    return -1;
  }

  LutRole role_of(std::size_t stage, BlockKind kind) const {
    if (kind == BlockKind::kChannel) return LutRole::kChannel;
    return static_cast<int>(stage) == output_stage() ? LutRole::kSpatialOutput : LutRole::kSpatialIntermediate;
  }

  friend bool operator==(const PipelineSpec&, const PipelineSpec&) = default;
};

/// Checks the structural invariants; throws Errc::kConfig naming the problem.
inline void validate(const PipelineSpec& spec) {
  auto fail = [](const std::string& msg) { throw Error(Errc::kConfig, msg); };
  if (spec.stages.empty()) fail("pipeline needs at least one stage");
  const bool demosaic = spec.frontend != Frontend::kNone;
  if (demosaic != (spec.task == Task::kDemosaic)) fail("frontend: Bayer frontends go with task = demosaic");
  const int last_spatial = spec.output_stage();
  if (last_spatial < 0) fail("pipeline has no spatial block");
  int net_scale = 1;
  for (std::size_t i = 0; i < spec.stages.size(); ++i) {
    const auto& st = spec.stages[i];
    const std::string where = "stage " + std::to_string(i + 1) + ": ";
    if (st.blocks.empty() && !st.channel) fail(where + "empty stage");
    for (const auto& b : st.blocks) {
      if (b.kind != BlockKind::kSpatial) fail(where + "blocks: channel block listed as spatial");
      if (b.upscale < 1 || b.upscale > 8) fail(where + "upscale must be in [1, 8]");
      if (b.upscale != st.upscale()) fail(where + "upscale: parallel blocks must share the upscale factor");
      if (b.q < 0 || b.q > kMaxBits) fail(where + "q out of range");
      if (!b.luts.empty() && b.luts.size() != static_cast<std::size_t>(b.copies)) fail(where + "luts: count mismatch");
    }
    if (st.channel) {
      const auto& c = *st.channel;
      if (c.kind != BlockKind::kChannel || c.upscale != 1 || c.out_channels != 3 || c.copies != 1) {
        fail(where + "channel block must be a 3D table with m = 3 and r = 1");
      }
      if (spec.color_mode != ColorMode::kPerChannelLut) {
        fail(where + "color_mode: channel blocks need color_mode = per-channel+channel-LUT");
      }
    }
    const bool front = demosaic && i == 0;
    if (front) {
      if (st.blocks.size() != 1 || st.blocks[0].pattern.id() != 'S' || st.blocks[0].upscale != 2) {
        fail(where + "demosaic frontend stage must be a single S block with upscale = 2");
      }
      const int want_c = spec.frontend == Frontend::kBayerCells ? 3 : 1;
      if (st.blocks[0].out_channels != want_c || st.blocks[0].copies != 1) {
        fail(where + "demosaic frontend block has the wrong output layout");
      }
      continue;
    }
    if (st.upscale() > 1 && static_cast<int>(i) != last_spatial) {
      fail(where + "upscale: only the final spatial stage may upscale");
    }
    net_scale *= st.upscale();
    const int want_copies = spec.color_mode == ColorMode::kPerChannelLut ? 3 : 1;
    for (const auto& b : st.blocks) {
      if (b.out_channels != 1) fail(where + "spatial blocks emit one channel");
      if (b.copies != want_copies) fail(where + "copies do not match color_mode");
    }
  }
  if (spec.scale != net_scale) {
    fail("scale: declared " + std::to_string(spec.scale) + " but stages upscale by " + std::to_string(net_scale));
  }
}

namespace detail {

inline std::vector<Pattern> patterns_of(std::string_view ids) {
  std::vector<Pattern> out;
  for (char c : ids) out.push_back(*patterns::builtin(c));
  return out;
}

inline StageSpec make_stage(std::string_view ids, int upscale, int q, int copies = 1) {
  StageSpec st;
  for (const auto& p : patterns_of(ids)) st.blocks.push_back(BlockSpec::spatial(p, upscale, 1, q, copies));
  return st;
}

}  // namespace detail

inline std::vector<std::string> preset_names() {
  return {"SR-LUT",    "MuLUT-S",        "MuLUT-SDY",        "MuLUT-SDYEHO",      "MuLUT-SDY-X2", "MuLUT-SDYEHO-X2",
          "MuLUT-S-X2", "MuLUT-S-X3",    "MuLUT-S-X4",       "MuLUT-SDY-X2-C",    "MuLUT-SDYEHO-X2-C",
          "Baseline-A", "Baseline-B"};
}

/// Named configurations. Scale 1 selects the restoration (denoise) variant
/// of the grayscale presets; the demosaic presets take scale 2, the factor
/// of their Bayer frontend.
inline PipelineSpec preset(const std::string& name, int scale, int q = 4) {
  PipelineSpec spec;
  spec.name = name;
  const bool demosaic = name == "MuLUT-SDY-X2-C" || name == "Baseline-A" || name == "Baseline-B";
  if (demosaic) {
    if (scale != 2) throw Error(Errc::kConfig, name + ": demosaic presets take scale 2 (Bayer frontend factor)");
    spec.task = Task::kDemosaic;
    spec.scale = 1;
    spec.color_mode = ColorMode::kPerChannel;
    if (name == "Baseline-A") {
      spec.frontend = Frontend::kBayerPlanes;
      spec.stages.push_back(StageSpec{{BlockSpec::spatial(patterns::S(), 2, 1, q)}, std::nullopt});
    } else {
      spec.frontend = Frontend::kBayerCells;
      spec.stages.push_back(StageSpec{{BlockSpec::spatial(patterns::S(), 2, 3, q)}, std::nullopt});
      if (name == "MuLUT-SDY-X2-C") {
        spec.color_mode = ColorMode::kPerChannelLut;
        StageSpec st = detail::make_stage("SDY", 1, q, 3);
        st.channel = BlockSpec::channel(q);
        spec.stages.push_back(std::move(st));
      }
    }
    validate(spec);
    return spec;
  }

  if (name == "MuLUT-SDYEHO-X2-C") {
    if (scale != 1) throw Error(Errc::kConfig, name + ": colour restoration preset takes scale 1");
    spec.task = Task::kDenoise;
    spec.scale = 1;
    spec.color_mode = ColorMode::kPerChannelLut;
    StageSpec s1 = detail::make_stage("SDYEHO", 1, q, 3);
    s1.channel = BlockSpec::channel(q);
    spec.stages.push_back(std::move(s1));
    spec.stages.push_back(detail::make_stage("SDYEHO", 1, q, 3));
    validate(spec);
    return spec;
  }

  if (scale < 1 || scale > 4) throw Error(Errc::kConfig, name + ": scale must be 1 (restoration) or 2..4 (SR)");
  spec.task = scale == 1 ? Task::kDenoise : Task::kSr;
  spec.scale = scale;
  if (name == "SR-LUT" || name == "MuLUT-S") {
    spec.stages.push_back(detail::make_stage("S", scale, q));
  } else if (name == "MuLUT-SDY") {
    spec.stages.push_back(detail::make_stage("SDY", scale, q));
  } else if (name == "MuLUT-SDYEHO") {
    spec.stages.push_back(detail::make_stage("SDYEHO", scale, q));
  } else if (name == "MuLUT-SDY-X2") {
    spec.stages.push_back(detail::make_stage("SDY", 1, q));
    spec.stages.push_back(detail::make_stage("SDY", scale, q));
  } else if (name == "MuLUT-SDYEHO-X2") {
    spec.stages.push_back(detail::make_stage("SDYEHO", 1, q));
    spec.stages.push_back(detail::make_stage("SDYEHO", scale, q));
  } else if (name == "MuLUT-S-X2" || name == "MuLUT-S-X3" || name == "MuLUT-S-X4") {
    const int depth = name.back() - '0';
    for (int i = 0; i + 1 < depth; ++i) spec.stages.push_back(detail::make_stage("S", 1, q));
    spec.stages.push_back(detail::make_stage("S", scale, q));
  } else {
    throw Error(Errc::kConfig, "unknown preset '" + name + "'");
  }
  validate(spec);
  return spec;
}

/// File name used for a preset's tables inside a LUT directory.
inline std::string default_lut_name(std::size_t stage, const BlockSpec& block, int copy) {
  std::string s = "stage" + std::to_string(stage + 1) + "_";
  if (block.kind == BlockKind::kChannel) return s + "channel.mlut";
  s += block.pattern.id();
  if (block.copies > 1) s += "_c" + std::to_string(copy);
  return s + ".mlut";
}

inline void assign_default_lut_paths(PipelineSpec& spec, const std::filesystem::path& dir) {
  for (std::size_t i = 0; i < spec.stages.size(); ++i) {
    auto& st = spec.stages[i];
    auto assign = [&](BlockSpec& b) {
      b.lut_paths.clear();
      for (int c = 0; c < b.copies; ++c) b.lut_paths.push_back((dir / default_lut_name(i, b, c)).string());
    };
    for (auto& b : st.blocks) assign(b);
    if (st.channel) assign(*st.channel);
  }
}

/// Lists every header field of `file` that disagrees with `block`.
inline std::vector<std::string> header_mismatches(const LutFile& file, const BlockSpec& block,
                                                  std::optional<LutRole> role = std::nullopt) {
  std::vector<std::string> out;
  auto field = [&](const char* name, long got, long want) {
    if (got != want) {
      out.push_back(std::string(name) + ": file has " + std::to_string(got) + ", block expects " +
                    std::to_string(want));
    }
  };
  field("n", file.table.n(), block.n());
  field("m", file.table.m(), block.m());
  field("q", file.table.q(), block.q);
  field("r", file.upscale, block.upscale);
  if (role) field("role", static_cast<long>(file.role), static_cast<long>(*role));
  if (block.kind == BlockKind::kSpatial) {
    if (!file.pattern) {
      out.push_back("pattern: file carries no pattern, block expects '" + std::string(1, block.pattern.id()) + "'");
    } else if (file.pattern->id() != block.pattern.id()) {
      out.push_back("pattern: file has '" + std::string(1, file.pattern->id()) + "', block expects '" +
                    std::string(1, block.pattern.id()) + "'");
    } else if (!(file.pattern->offsets() == block.pattern.offsets())) {
      out.push_back(std::string("pattern: offsets of '") + block.pattern.id() + "' differ from the block's");
    }
  } else if (file.pattern) {
    out.push_back("pattern: channel table carries a spatial pattern");
  }
  return out;
}

/// Loads every table named in lut_paths (relative to base_dir) and checks
/// its header against the block.
inline void load_luts(PipelineSpec& spec, const std::filesystem::path& base_dir = {}) {
  for (std::size_t i = 0; i < spec.stages.size(); ++i) {
    auto load_block = [&](BlockSpec& b) {
      if (b.lut_paths.size() != static_cast<std::size_t>(b.copies)) {
        throw Error(Errc::kConfig, "stage " + std::to_string(i + 1) + ": luts: expected " +
                                       std::to_string(b.copies) + " file(s) for block");
      }
      b.luts.clear();
      for (const auto& p : b.lut_paths) {
        std::filesystem::path path(p);
        if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
        if (!std::filesystem::exists(path)) {
          throw Error(Errc::kConfig, "stage " + std::to_string(i + 1) + ": luts: missing file " + path.string());
        }
        LutFile f = load_lut(path);
        const auto bad = header_mismatches(f, b, spec.role_of(i, b.kind));
        if (!bad.empty()) {
          throw Error(Errc::kConfig, "stage " + std::to_string(i + 1) + ": luts: " + path.string() + ": " + bad.front());
        }
        b.luts.push_back(std::make_shared<const LutTable>(std::move(f.table)));
      }
    };
    for (auto& b : spec.stages[i].blocks) load_block(b);
    if (spec.stages[i].channel) load_block(*spec.stages[i].channel);
  }
}

inline std::string serialize_config(const PipelineSpec& spec) {
  std::ostringstream os;
  os << "name = " << spec.name << "\n";
  os << "task = " << to_string(spec.task) << "\n";
  os << "scale = " << spec.scale << "\n";
  os << "color_mode = " << to_string(spec.color_mode) << "\n";
  if (spec.frontend != Frontend::kNone) os << "frontend = " << to_string(spec.frontend) << "\n";
  for (const auto& st : spec.stages) {
    os << "[stage]\n";
    os << "blocks =";
    for (const auto& b : st.blocks) os << ' ' << b.pattern.id();
    if (st.channel) os << " channel";
    os << "\n";
    std::vector<std::string> paths;
    for (const auto& b : st.blocks) paths.insert(paths.end(), b.lut_paths.begin(), b.lut_paths.end());
    if (st.channel) paths.insert(paths.end(), st.channel->lut_paths.begin(), st.channel->lut_paths.end());
    if (!paths.empty()) {
      os << "luts =";
      for (const auto& p : paths) os << ' ' << p;
      os << "\n";
    }
    os << "upscale = " << st.upscale() << "\n";
    const int q = st.blocks.empty() ? st.channel->q : st.blocks.front().q;
    os << "q = " << q << "\n";
    if (spec.frontend != Frontend::kNone && &st == &spec.stages.front()) {
      os << "out_channels = " << st.blocks.front().out_channels << "\n";
    }
  }
  return os.str();
}

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ' ' || c == '\t' || c == ',') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

inline int parse_int(const std::string& v, const std::string& ctx) {
  try {
    std::size_t used = 0;
    const int x = std::stoi(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw Error(Errc::kConfig, ctx + ": expected an integer, got '" + v + "'");
  }
}

}  // namespace detail

/// Parses a configuration document. `source` names the document in
/// diagnostics; relative LUT paths resolve against `base_dir`. When
/// `load` is false, LUT files are not opened.
inline PipelineSpec parse_config(std::string_view text, const std::filesystem::path& base_dir = {},
                                 const std::string& source = "<config>", bool load = true) {
  struct RawStage {
    int line = 0;
    std::vector<std::string> blocks;
    std::vector<std::string> luts;
    std::optional<int> upscale, q, out_channels;
  };
  std::map<std::string, std::pair<std::string, int>> top;
  std::vector<RawStage> raw;
  static const char* kTopKeys[] = {"name", "task", "scale", "color_mode", "q", "frontend", "preset", "lut_dir"};
  static const char* kStageKeys[] = {"blocks", "luts", "upscale", "q", "out_channels"};

  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    const std::string ctx = source + ":" + std::to_string(lineno);
    if (t == "[stage]") {
      raw.push_back(RawStage{lineno, {}, {}, {}, {}, {}});
      continue;
    }
    if (t.front() == '[') throw Error(Errc::kConfig, ctx + ": unknown section " + t);
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw Error(Errc::kConfig, ctx + ": expected 'key = value'");
    const std::string key = detail::trim(std::string_view(t).substr(0, eq));
    const std::string value = detail::trim(std::string_view(t).substr(eq + 1));
    if (raw.empty()) {
      if (std::find(std::begin(kTopKeys), std::end(kTopKeys), key) == std::end(kTopKeys)) {
        throw Error(Errc::kConfig, ctx + ": unknown key '" + key + "'");
      }
      if (top.count(key)) throw Error(Errc::kConfig, ctx + ": duplicate key '" + key + "'");
      top[key] = {value, lineno};
      continue;
    }
    if (std::find(std::begin(kStageKeys), std::end(kStageKeys), key) == std::end(kStageKeys)) {
      throw Error(Errc::kConfig, ctx + ": unknown stage key '" + key + "'");
    }
    auto& st = raw.back();
    if (key == "blocks") {
      st.blocks = detail::split_list(value);
    } else if (key == "luts") {
      st.luts = detail::split_list(value);
    } else if (key == "upscale") {
      st.upscale = detail::parse_int(value, ctx + ": upscale");
    } else if (key == "q") {
      st.q = detail::parse_int(value, ctx + ": q");
    } else {
      st.out_channels = detail::parse_int(value, ctx + ": out_channels");
    }
  }

  auto top_ctx = [&](const std::string& key) {
    return source + ":" + std::to_string(top.count(key) ? top[key].second : 0) + ": " + key;
  };
  auto get = [&](const std::string& key) -> std::optional<std::string> {
    if (!top.count(key)) return std::nullopt;
    return top[key].first;
  };

  std::optional<int> top_q;
  if (auto v = get("q")) top_q = detail::parse_int(*v, top_ctx("q"));

  if (auto name = get("preset")) {
    if (!raw.empty()) throw Error(Errc::kConfig, source + ": a preset document cannot contain [stage] sections");
    const auto scale_s = get("scale");
    if (!scale_s) throw Error(Errc::kConfig, source + ": scale: required");
    PipelineSpec spec;
    try {
      spec = preset(*name, detail::parse_int(*scale_s, top_ctx("scale")), top_q.value_or(4));
    } catch (const Error& e) {
      throw Error(Errc::kConfig, top_ctx("preset") + ": " + e.what());
    }
    if (auto dir = get("lut_dir")) {
      std::filesystem::path d(*dir);
      if (d.is_relative() && !base_dir.empty()) d = base_dir / d;
      assign_default_lut_paths(spec, d);
      if (load) {
        try {
          load_luts(spec);
        } catch (const Error& e) {
          throw Error(Errc::kConfig, top_ctx("lut_dir") + ": " + e.what());
        }
      }
    }
    return spec;
  }

  PipelineSpec spec;
  spec.name = get("name").value_or("custom");
  const auto task = get("task");
  if (!task) throw Error(Errc::kConfig, source + ": task: required");
  if (*task == "sr") spec.task = Task::kSr;
  else if (*task == "denoise") spec.task = Task::kDenoise;
  else if (*task == "deblock") spec.task = Task::kDeblock;
  else if (*task == "demosaic") spec.task = Task::kDemosaic;
  else if (*task == "custom") spec.task = Task::kCustom;
  else throw Error(Errc::kConfig, top_ctx("task") + ": unknown task '" + *task + "'");

  const auto scale = get("scale");
  if (!scale) throw Error(Errc::kConfig, source + ": scale: required");
  spec.scale = detail::parse_int(*scale, top_ctx("scale"));

  const std::string cm = get("color_mode").value_or("grayscale");
  if (cm == "grayscale") spec.color_mode = ColorMode::kGrayscale;
  else if (cm == "per-channel") spec.color_mode = ColorMode::kPerChannel;
  else if (cm == "per-channel+channel-LUT") spec.color_mode = ColorMode::kPerChannelLut;
  else throw Error(Errc::kConfig, top_ctx("color_mode") + ": unknown color mode '" + cm + "'");

  if (spec.task == Task::kDemosaic) {
    const std::string fe = get("frontend").value_or("cells");
    if (fe == "cells") spec.frontend = Frontend::kBayerCells;
    else if (fe == "planes") spec.frontend = Frontend::kBayerPlanes;
    else throw Error(Errc::kConfig, top_ctx("frontend") + ": unknown frontend '" + fe + "'");
  } else if (get("frontend")) {
    throw Error(Errc::kConfig, top_ctx("frontend") + ": only valid with task = demosaic");
  }

  if (raw.empty()) throw Error(Errc::kConfig, source + ": no [stage] sections");
  const bool per_channel_luts = spec.color_mode == ColorMode::kPerChannelLut;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto& rs = raw[i];
    const std::string ctx = source + ":" + std::to_string(rs.line) + ": stage " + std::to_string(i + 1);
    if (rs.blocks.empty()) throw Error(Errc::kConfig, ctx + ": blocks: required");
    const int q = rs.q.value_or(top_q.value_or(4));
    const int up = rs.upscale.value_or(1);
    const bool front = spec.frontend != Frontend::kNone && i == 0;
    StageSpec st;
    std::size_t want_luts = 0;
    for (std::size_t k = 0; k < rs.blocks.size(); ++k) {
      const auto& tok = rs.blocks[k];
      if (tok == "channel") {
        if (k + 1 != rs.blocks.size()) throw Error(Errc::kConfig, ctx + ": blocks: 'channel' must come last");
        st.channel = BlockSpec::channel(q);
        want_luts += 1;
        continue;
      }
      if (tok.size() != 1) throw Error(Errc::kConfig, ctx + ": blocks: pattern ids are single characters, got '" + tok + "'");
      auto p = patterns::builtin(tok[0]);
      if (!p && rs.luts.empty()) {
        throw Error(Errc::kConfig, ctx + ": blocks: pattern '" + tok + "' is not built in and no LUT file defines it");
      }
      BlockSpec b = BlockSpec::spatial(p.value_or(Pattern(tok[0], patterns::S().offsets())), up,
                                       front ? rs.out_channels.value_or(spec.frontend == Frontend::kBayerCells ? 3 : 1)
                                             : rs.out_channels.value_or(1),
                                       q, per_channel_luts && !front ? 3 : 1);
      want_luts += static_cast<std::size_t>(b.copies);
      st.blocks.push_back(std::move(b));
    }
    if (!rs.luts.empty()) {
      if (rs.luts.size() != want_luts) {
        throw Error(Errc::kConfig, ctx + ": luts: expected " + std::to_string(want_luts) + " file(s), got " +
                                       std::to_string(rs.luts.size()));
      }
      std::size_t cursor = 0;
      for (auto& b : st.blocks)
        for (int c = 0; c < b.copies; ++c) b.lut_paths.push_back(rs.luts[cursor++]);
      if (st.channel) st.channel->lut_paths.push_back(rs.luts[cursor++]);
      // Patterns defined by file headers override the built-in coordinates.
      for (auto& b : st.blocks) {
        std::filesystem::path path(b.lut_paths.front());
        if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
        if (!load) continue;
        if (!std::filesystem::exists(path)) throw Error(Errc::kConfig, ctx + ": luts: missing file " + path.string());
        const LutFile f = load_lut(path);
        if (f.pattern && f.pattern->id() == b.pattern.id()) b.pattern = *f.pattern;
        if (!rs.q && !top_q) b.q = f.table.q();
      }
      if (st.channel && load && !rs.q && !top_q) {
        std::filesystem::path path(st.channel->lut_paths.front());
        if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
        if (!std::filesystem::exists(path)) throw Error(Errc::kConfig, ctx + ": luts: missing file " + path.string());
        st.channel->q = load_lut(path).table.q();
      }
    }
    spec.stages.push_back(std::move(st));
  }

  try {
    validate(spec);
  } catch (const Error& e) {
    throw Error(Errc::kConfig, source + ": " + e.what());
  }
  bool has_paths = false;
  for (const auto& st : spec.stages) {
    for (const auto& b : st.blocks) has_paths = has_paths || !b.lut_paths.empty();
    if (st.channel) has_paths = has_paths || !st.channel->lut_paths.empty();
  }
  if (load && has_paths) {
    try {
      load_luts(spec, base_dir);
    } catch (const Error& e) {
      throw Error(Errc::kConfig, source + ": " + e.what());
    }
  }
  return spec;
}

inline PipelineSpec load_config(const std::filesystem::path& path, bool load = true) {
  const auto bytes = read_file_bytes(path);
  return parse_config(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()),
                      path.parent_path(), path.string(), load);
}

}  // namespace mulut
