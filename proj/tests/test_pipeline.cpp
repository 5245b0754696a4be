// SPDX-FileCopyrightText: © 2026 The mulut Authors
//
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "mulut/pipeline.hpp"
#include "support/oracles.hpp"

namespace mulut {
namespace {

namespace fs = std::filesystem;

// Sum of (levels^n * m) over every table, computed from the block list alone.
std::uintmax_t expected_payload(const PipelineSpec& spec) {
  std::uintmax_t total = 0;
  for (const auto& st : spec.stages) {
    for (const auto& b : st.blocks) {
      std::uintmax_t e = static_cast<std::uintmax_t>(b.m()) * static_cast<std::uintmax_t>(b.copies);
      for (int d = 0; d < 4; ++d) e *= (1u << (8 - b.q)) + 1;
      total += e;
    }
    if (st.channel) {
      std::uintmax_t e = 3;
      for (int d = 0; d < 3; ++d) e *= (1u << (8 - st.channel->q)) + 1;
      total += e;
    }
  }
  return total;
}

TEST(Presets, PayloadBytes) {
  EXPECT_EQ(preset("SR-LUT", 4).payload_bytes(), 1'336'336u);
  EXPECT_EQ(preset("MuLUT-SDY-X2", 4).payload_bytes(), 4'259'571u);
  EXPECT_EQ(preset("MuLUT-SDY-X2", 2).payload_bytes(), 1'252'815u);
  EXPECT_EQ(preset("MuLUT-SDY", 2).payload_bytes(), 1'002'252u);
  EXPECT_EQ(preset("MuLUT-SDY-X2-C", 2).payload_bytes(), 1'768'680u);
  for (const auto& name : preset_names()) {
    const bool dm = name == "MuLUT-SDY-X2-C" || name == "Baseline-A" || name == "Baseline-B";
    const int scale = dm ? 2 : name == "MuLUT-SDYEHO-X2-C" ? 1 : 3;
    for (int q : {3, 4, 5}) {
      const PipelineSpec spec = preset(name, scale, q);
      EXPECT_EQ(spec.payload_bytes(), expected_payload(spec)) << name << " q=" << q;
    }
  }
}

TEST(Presets, Structure) {
  const auto sdy = preset("MuLUT-SDY-X2", 4);
  ASSERT_EQ(sdy.stages.size(), 2u);
  EXPECT_EQ(sdy.stages[0].upscale(), 1);
  EXPECT_EQ(sdy.stages[1].upscale(), 4);
  EXPECT_EQ(sdy.stages[1].blocks[2].m(), 16);
  EXPECT_EQ(sdy.task, Task::kSr);
  EXPECT_EQ(preset("MuLUT-SDY", 1).task, Task::kDenoise);
  EXPECT_EQ(preset("MuLUT-S-X4", 1).stages.size(), 4u);
  const auto c = preset("MuLUT-SDYEHO-X2-C", 1);
  EXPECT_EQ(c.color_mode, ColorMode::kPerChannelLut);
  EXPECT_TRUE(c.stages[0].channel);
  EXPECT_EQ(c.stages[1].blocks[5].copies, 3);
  EXPECT_THROW(preset("MuLUT-XYZ", 2), Error);
  EXPECT_THROW(preset("MuLUT-SDY-X2-C", 4), Error);
  EXPECT_THROW(preset("SR-LUT", 5), Error);
}

TEST(Presets, ReceptiveFieldMetadata) {
  EXPECT_EQ(preset("MuLUT-S", 1).receptive_field(), 3);
  EXPECT_EQ(preset("MuLUT-SDY", 1).receptive_field(), 5);
  EXPECT_EQ(preset("MuLUT-SDYEHO", 1).receptive_field(), 7);
  EXPECT_EQ(preset("MuLUT-SDY-X2", 4).receptive_field(), 9);
  EXPECT_EQ(preset("MuLUT-SDYEHO-X2", 1).receptive_field(), 13);
  EXPECT_EQ(preset("MuLUT-S-X2", 1).receptive_field(), 5);
  EXPECT_EQ(preset("MuLUT-S-X3", 1).receptive_field(), 7);
  EXPECT_EQ(preset("MuLUT-S-X4", 1).receptive_field(), 9);
}

TEST(Presets, Roles) {
  const auto spec = preset("MuLUT-SDY-X2-C", 2);
  EXPECT_EQ(spec.role_of(0, BlockKind::kSpatial), LutRole::kSpatialIntermediate);
  EXPECT_EQ(spec.role_of(1, BlockKind::kSpatial), LutRole::kSpatialOutput);
  EXPECT_EQ(spec.role_of(1, BlockKind::kChannel), LutRole::kChannel);
}

TEST(Config, SerializeParseRoundTrip) {
  for (const auto& name : preset_names()) {
    const bool dm = name == "MuLUT-SDY-X2-C" || name == "Baseline-A" || name == "Baseline-B";
    const int scale = dm ? 2 : name == "MuLUT-SDYEHO-X2-C" ? 1 : 4;
    const PipelineSpec spec = preset(name, scale, 5);
    const PipelineSpec back = parse_config(serialize_config(spec), {}, "<test>", false);
    EXPECT_EQ(back, spec) << name << "\n" << serialize_config(spec);
    EXPECT_EQ(serialize_config(back), serialize_config(spec));
  }
}

TEST(Config, HandWrittenStages) {
  const char* text = R"(# three stage grayscale denoiser
task = denoise
scale = 1
[stage]
blocks = S D
[stage]
blocks = Y
q = 5
[stage]
blocks = S E   # trailing comment
)";
  const PipelineSpec spec = parse_config(text, {}, "<test>", false);
  ASSERT_EQ(spec.stages.size(), 3u);
  EXPECT_EQ(spec.stages[1].blocks[0].q, 5);
  EXPECT_EQ(spec.stages[2].blocks[1].pattern, patterns::E());
  EXPECT_EQ(spec.receptive_field(), 2 * (2 + 2 + 3) + 1);
  EXPECT_FALSE(spec.bound());
}

Errc config_error(const std::string& text, std::string* what = nullptr) {
  try {
    (void)parse_config(text, {}, "<test>", false);
  } catch (const Error& e) {
    if (what) *what = e.what();
    return e.code();
  }
  ADD_FAILURE() << "accepted:\n" << text;
  return Errc::kIo;
}

TEST(Config, ErrorsNameTheField) {
  std::string what;
  EXPECT_EQ(config_error("task = sr\nscale = 2\n[stage]\nblocks = S\nupscale = 4\n", &what), Errc::kConfig);
  EXPECT_NE(what.find("scale"), std::string::npos) << what;

  EXPECT_EQ(config_error("task = sr\nscale = 4\n[stage]\nblocks = S\nupscale = 2\n[stage]\nblocks = S\nupscale = 2\n", &what),
            Errc::kConfig);
  EXPECT_NE(what.find("upscale"), std::string::npos) << what;

  EXPECT_EQ(config_error("task = sr\nscale = 1\n[stage]\nblocks = S channel\n", &what), Errc::kConfig);
  EXPECT_NE(what.find("color_mode"), std::string::npos) << what;

  EXPECT_EQ(config_error("task = sr\nscale = 1\n[stage]\nblocks = Q\n", &what), Errc::kConfig);
  EXPECT_NE(what.find("blocks"), std::string::npos) << what;

  EXPECT_EQ(config_error("task = sr\nscale = 1\nbogus = 3\n[stage]\nblocks = S\n", &what), Errc::kConfig);
  EXPECT_NE(what.find("bogus"), std::string::npos) << what;

  EXPECT_EQ(config_error("task = sr\nscale = 1\n[stage]\nblocks = S\nluts = a.mlut b.mlut\n", &what), Errc::kConfig);
  EXPECT_NE(what.find("luts"), std::string::npos) << what;

  EXPECT_EQ(config_error("task = sr\nscale = x\n[stage]\nblocks = S\n"), Errc::kConfig);
  EXPECT_EQ(config_error("scale = 1\n[stage]\nblocks = S\n"), Errc::kConfig);
  EXPECT_EQ(config_error("task = sr\nscale = 1\n"), Errc::kConfig);
  EXPECT_EQ(config_error("preset = MuLUT-SDY\n"), Errc::kConfig);
  EXPECT_EQ(config_error("preset = Nope\nscale = 2\n"), Errc::kConfig);
}

class ConfigFiles : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("mulut_cfg_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  void write(const std::string& name, const std::string& text) { std::ofstream(dir_ / name) << text; }
  fs::path dir_;
};

TEST_F(ConfigFiles, LoadsTablesRelativeToConfig) {
  save_lut(dir_ / "s.mlut", LutFile{testing::random_table(4, 4, 4, 1), patterns::S(), LutRole::kSpatialOutput, 2});
  write("p.cfg", "task = sr\nscale = 2\n[stage]\nblocks = S\nluts = s.mlut\nupscale = 2\n");
  const PipelineSpec spec = load_config(dir_ / "p.cfg");
  EXPECT_TRUE(spec.bound());
  EXPECT_EQ(*spec.stages[0].blocks[0].luts[0], testing::random_table(4, 4, 4, 1));
}

TEST_F(ConfigFiles, HeaderMismatchIsConfigError) {
  save_lut(dir_ / "d.mlut", LutFile{testing::random_table(4, 4, 4, 1), patterns::D(), LutRole::kSpatialOutput, 2});
  write("p.cfg", "task = sr\nscale = 2\n[stage]\nblocks = S\nluts = d.mlut\nupscale = 2\n");
  try {
    (void)load_config(dir_ / "p.cfg");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kConfig);
    EXPECT_NE(std::string(e.what()).find("pattern"), std::string::npos) << e.what();
  }
  write("q.cfg", "task = sr\nscale = 2\n[stage]\nblocks = S\nluts = missing.mlut\nupscale = 2\n");
  EXPECT_THROW((void)load_config(dir_ / "q.cfg"), Error);
}

TEST_F(ConfigFiles, CustomPatternFromHeader) {
  const Pattern z('Z', {Offset{0, 0}, Offset{0, 3}, Offset{1, 2}, Offset{3, 1}});
  save_lut(dir_ / "z.mlut", LutFile{testing::random_table(4, 4, 1, 2), z, LutRole::kSpatialOutput, 1});
  write("p.cfg", "task = denoise\nscale = 1\n[stage]\nblocks = Z\nluts = z.mlut\n");
  const PipelineSpec spec = load_config(dir_ / "p.cfg");
  EXPECT_EQ(spec.stages[0].blocks[0].pattern, z);
  EXPECT_EQ(spec.receptive_field(), 7);
}

TEST_F(ConfigFiles, PresetDocumentWithLutDir) {
  PipelineSpec spec = preset("MuLUT-SDY", 2);
  testing::bind_random(spec, 3);
  assign_default_lut_paths(spec, dir_ / "luts");
  fs::create_directories(dir_ / "luts");
  for (const auto& b : spec.stages[0].blocks) {
    save_lut(b.lut_paths[0], LutFile{*b.luts[0], b.pattern, LutRole::kSpatialOutput, 2});
  }
  write("p.cfg", "preset = MuLUT-SDY\nscale = 2\nlut_dir = luts\n");
  const PipelineSpec loaded = load_config(dir_ / "p.cfg");
  ASSERT_TRUE(loaded.bound());
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(*loaded.stages[0].blocks[i].luts[0], *spec.stages[0].blocks[i].luts[0]);
}

TEST(HeaderMismatches, ListsEveryField) {
  const BlockSpec b = BlockSpec::spatial(patterns::S(), 2, 1, 4);
  const LutFile ok{LutTable(4, 4, 4), patterns::S(), LutRole::kSpatialOutput, 2};
  EXPECT_TRUE(header_mismatches(ok, b, LutRole::kSpatialOutput).empty());
  const LutFile bad{LutTable(5, 4, 1), patterns::Y(), LutRole::kSpatialIntermediate, 1};
  const auto diags = header_mismatches(bad, b, LutRole::kSpatialOutput);
  EXPECT_EQ(diags.size(), 5u);
}

}  // namespace
}  // namespace mulut
