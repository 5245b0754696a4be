// SPDX-FileCopyrightText: © 2026 The mulut Authors
//
// SPDX-License-Identifier: Apache-2.0

// Acceptance run: one PASS/FAIL line per criterion, exit code 1 on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "mulut/cli.hpp"
#include "mulut/mulut.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

namespace {

using namespace mulut;
namespace fs = std::filesystem;

struct Outcome {
  bool ok = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// A1: storage law and the SDY-X2 x4 payload.
Outcome a1() {
  Outcome o;
  // oracle: (2^(8-q)+1)^n * m by repeated multiplication
  auto law = [](int q, int n, std::uintmax_t m) {
    std::uintmax_t levels = (std::uintmax_t{1} << (8 - q)) + 1, s = m;
    for (int i = 0; i < n; ++i) s *= levels;
    return s;
  };
  const auto single = lut_size_bytes(4, 4, 16);
  const auto total = preset("MuLUT-SDY-X2", 4, 4).payload_bytes();
  o.ok = single == 1'336'336u && single == law(4, 4, 16) && total == 4'259'571u;
  for (int q = 0; q <= 8 && o.ok; ++q)
    for (int n = 1; n <= 4; ++n)
      for (std::uintmax_t m : {1u, 3u, 4u, 9u, 16u}) o.ok = o.ok && lut_size_bytes(q, n, m) == law(q, n, m);
  o.detail = fmt("lut_size_bytes(4,4,16)=%ju SDY-X2x4 payload=%ju", single, total);
  return o;
}

// A2: grid exactness, affine reproduction, weight sum.
Outcome a2() {
  Outcome o;
  std::mt19937_64 rng(2024);
  long grid_bad = 0, affine_bad = 0, affine_n = 0, affine_skipped = 0, weight_bad = 0;

  for (int q = 2; q <= 6; ++q) {
    const std::uint32_t w = 1u << q;
    const LutTable t = testing::random_table(q, 4, 3, 77 + static_cast<std::uint64_t>(q));
    for (int i = 0; i < 2000; ++i) {
      int idx[4];
      std::array<std::uint8_t, 4> x{};
      for (int d = 0; d < 4; ++d) {
        idx[d] = static_cast<int>(rng() % static_cast<std::uint64_t>(t.levels() - 1));  // 256 is not a pixel value
        x[static_cast<std::size_t>(d)] = static_cast<std::uint8_t>(idx[d] * static_cast<int>(w));
      }
      const auto r = simplex_interp_4d(t, x);
      const std::size_t e = t.entry_index(idx);
      for (int v = 0; v < 3; ++v)
        if (r.numerator[static_cast<std::size_t>(v)] != w * t.at(e, v)) ++grid_bad;
    }

    // Mean of four sampled at the grid, exact except for the 256,256,256,256 corner
    // whose value 256 does not fit in a byte.
    LutTable mean(q, 4, 1);
    for (std::size_t e = 0; e < mean.entries(); ++e) {
      std::size_t rest = e;
      int s = 0;
      for (int d = 0; d < 4; ++d) {
        s += static_cast<int>(rest % static_cast<std::size_t>(mean.levels())) * static_cast<int>(w);
        rest /= static_cast<std::size_t>(mean.levels());
      }
      mean.at(e, 0) = static_cast<std::uint8_t>(std::min(s / 4, 255));
    }
    for (int i = 0; i < 2000; ++i) {
      std::array<std::uint8_t, 4> x{};
      bool top = true;
      int s = 0;
      for (auto& v : x) {
        v = static_cast<std::uint8_t>(rng() >> 56);
        s += v;
        top = top && v > 256 - static_cast<int>(w);
      }
      const auto sx = locate_simplex<4>(q, mean.levels(), x);
      std::uint32_t sum = 0;
      for (auto k : sx.weight) sum += k;
      if (sum != w) ++weight_bad;
      if (top) {
        ++affine_skipped;
        continue;
      }
      ++affine_n;
      const auto r = simplex_interp_4d(mean, x);
      // output = numerator / W must equal s / 4 exactly
      if (4 * static_cast<std::uint64_t>(r.numerator[0]) != static_cast<std::uint64_t>(s) * w) ++affine_bad;
    }
  }
  o.ok = grid_bad == 0 && affine_bad == 0 && weight_bad == 0;
  o.detail = fmt("grid mismatches %ld/10000, affine mismatches %ld/%ld (%ld top-corner skipped), weight-sum errors %ld", grid_bad, affine_bad,
                 affine_n, affine_skipped, weight_bad);
  return o;
}

// A3: engine against the direct reference evaluator.
Outcome a3() {
  Outcome o;
  struct Case {
    const char* name;
    int scale;
  };
  int compared = 0, mismatched = 0;
  std::string first;
  for (const Case c : {Case{"SR-LUT", 2}, Case{"MuLUT-SDY", 2}, Case{"MuLUT-SDY-X2", 2}, Case{"MuLUT-SDYEHO-X2", 2}}) {
    for (int q : {2, 4, 6}) {
      PipelineSpec spec = preset(c.name, c.scale, q);
      testing::bind_random(spec, 100 + static_cast<std::uint64_t>(q));
      for (std::uint64_t s = 0; s < 100; ++s) {
        const ImagePlane img = testing::random_image(32, 32, 1, 5000 + s);
        ++compared;
        if (run_pipeline(spec, img, 1) != testing::reference_evaluate(spec, img)) {
          if (mismatched++ == 0) first = fmt(" first: %s q=%d image %d", c.name, q, static_cast<int>(s));
        }
      }
    }
  }
  o.ok = mismatched == 0;
  o.detail = fmt("%d/%d outputs bit-exact", compared - mismatched, compared) + first;
  return o;
}

// A4: probed receptive fields.
Outcome a4() {
  Outcome o;
  struct Case {
    const char* name;
    int want;
  };
  std::string d;
  for (const Case c : {Case{"MuLUT-S", 3}, Case{"MuLUT-SDY", 5}, Case{"MuLUT-SDYEHO", 7}, Case{"MuLUT-SDY-X2", 9}, Case{"MuLUT-SDYEHO-X2", 13},
                       Case{"MuLUT-S-X2", 5}, Case{"MuLUT-S-X3", 7}, Case{"MuLUT-S-X4", 9}}) {
    const PipelineSpec spec = preset(c.name, 1, 4);
    const int got = testing::probe_receptive_field(spec, 2, 31);
    const bool ok = got == c.want && spec.receptive_field() == c.want;
    o.ok = o.ok && ok;
    d += fmt("%s%s=%d", d.empty() ? "" : " ", c.name + (c.name[0] == 'M' ? 6 : 0), got);
  }
  o.detail = d;
  return o;
}

// A5: rot90 commutes with every scale-preserving preset.
Outcome a5() {
  Outcome o;
  int checked = 0, bad = 0;
  for (const std::string& name : preset_names()) {
    PipelineSpec spec;
    try {
      spec = preset(name, 1, 4);
    } catch (const Error&) {
      continue;  // scale-changing only
    }
    testing::bind_random(spec, 9);
    const bool colour = std::any_of(spec.stages.begin(), spec.stages.end(), [](const StageSpec& st) { return st.channel.has_value(); });
    const int channels = colour ? 3 : 1;
    for (std::uint64_t s = 0; s < 3; ++s) {
      const ImagePlane img = testing::random_image(23, 17, channels, 40 + s);
      const ImagePlane base = run_pipeline(spec, img, 1);
      for (int k = 1; k < 4; ++k) {
        ++checked;
        if (run_pipeline(spec, rot90(img, k), 1) != rot90(base, k)) ++bad;
      }
    }
  }
  o.ok = bad == 0 && checked > 0;
  o.detail = fmt("%d/%d rotated runs equal rotated output", checked - bad, checked);
  return o;
}

// A6: teacher-student fit and gradient check.
Outcome a6() {
  Outcome o;

  // Teacher: bilinear tables; student starts from the mean of four.
  PipelineSpec teacher = preset("MuLUT-SDY", 2, 4);
  testing::bind_all(teacher, [](const BlockSpec& b) { return cache_function(builtin_function("bilinear", b.upscale).fn, 4, b.m(), b.q); });
  PipelineSpec student = teacher;
  testing::bind_all(student, [](const BlockSpec& b) { return cache_function(builtin_function("mean", b.upscale).fn, 4, b.m(), b.q); });
  std::vector<Sample> data;
  for (std::uint64_t s = 0; s < 8; ++s) {
    const ImagePlane lq = bicubic_resize(testing::random_image(16, 16, 1, 100 + s, 20, 235), 64, 64, 4.0);
    data.push_back({lq, run_pipeline(teacher, lq)});
  }
  const double before = dataset_mse(student, data, 1);
  FinetuneState st(student);
  FinetuneOptions opt;
  opt.iters = 2000;
  opt.batch = 4;
  opt.patch = 32;
  opt.seed = 1;
  opt.threads = 1;
  (void)finetune(student, st, data, opt);
  const double after = dataset_mse(st.bind(student), data, 1);
  const double drop = 1.0 - after / before;

  PipelineSpec fd_spec = preset("MuLUT-SDY-X2", 2, 4);
  testing::bind_random(fd_spec, 15);
  FinetuneState fd_state(fd_spec);
  const std::vector<Sample> batch{{testing::random_image(10, 10, 1, 9), testing::random_image(20, 20, 1, 10)}};
  const auto g = testing::check_gradients(fd_spec, fd_state, batch, 100, 0.5, 0.05, 3);

  o.ok = drop >= 0.90 && g.compared == 100 && g.failures == 0;
  o.detail = fmt("mse %.3f -> %.3f (drop %.1f%%) in 2000 iters; FD %d entries, %d over 5%%, worst rel %.2e", before, after, 100.0 * drop,
                 g.compared, g.failures, g.worst_rel);
  return o;
}

ImagePlane perturb(const ImagePlane& img, int amp, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ImagePlane out = img;
  for (auto& v : out.data()) v = static_cast<std::uint8_t>(std::clamp(v + static_cast<int>(rng() % (2 * amp + 1)) - amp, 0, 255));
  return out;
}

// A7: metrics against direct formulas.
Outcome a7() {
  Outcome o;
  double worst = 0.0;
  int order_bad = 0, pairs = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const int c = s % 2 ? 3 : 1;
    const ImagePlane a = testing::random_image(40, 32, c, s);
    const ImagePlane b = perturb(a, 1 + static_cast<int>(s) * 3, s + 300);
    ++pairs;
    worst = std::max(worst, std::abs(psnr(a, b) - testing::psnr_ref(a, b)));
    worst = std::max(worst, std::abs(ssim(a, b) - testing::ssim_ref(a, b)));
    worst = std::max(worst, std::abs(psnr_b(a, b) - testing::psnr_b_ref(a, b)));
    if (c == 3) worst = std::max(worst, std::abs(cpsnr(a, b) - testing::cpsnr_ref(a, b)));
    if (!(psnr_b(a, b) <= psnr(a, b))) ++order_bad;
  }
  o.ok = worst <= 1e-9 && order_bad == 0;
  o.detail = fmt("max |diff| %.2e over %d pairs, psnr_b > psnr in %d", worst, pairs, order_bad);
  return o;
}

// A8: `run` is byte-identical across thread counts.
Outcome a8() {
  Outcome o;
  const fs::path dir = fs::temp_directory_path() / "mulut_acceptance_a8";
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto cli = [](std::vector<std::string> args) {
    args.insert(args.begin(), "mulut");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    if (code != 0) std::fprintf(stderr, "%s", err.str().c_str());
    return code;
  };
  int runs = 0, bad = 0;
  struct Case {
    const char* name;
    int scale;
    int in_c;
    int out_c;
  };
  for (const Case c : {Case{"MuLUT-SDYEHO-X2", 2, 1, 1}, Case{"MuLUT-S-X3", 4, 1, 1}, Case{"MuLUT-SDY-X2-C", 2, 1, 3}}) {
    PipelineSpec spec = preset(c.name, c.scale, 4);
    testing::bind_random(spec, 21);
    const fs::path p = dir / c.name;
    write_pipeline(p, spec);
    const std::string in = (p / (c.in_c == 3 ? "in.ppm" : "in.pgm")).string();
    write_pnm(in, testing::random_image(38, 30, c.in_c, 8));
    std::vector<std::uint8_t> first;
    for (const char* t : {"1", "2", "8"}) {
      const std::string out = (p / (std::string("out") + t + (c.out_c == 3 ? ".ppm" : ".pgm"))).string();
      ++runs;
      if (cli({"run", "--config", (p / "pipeline.cfg").string(), "--input", in, "--output", out, "--threads", t}) != 0) {
        ++bad;
        continue;
      }
      const auto bytes = read_file_bytes(out);
      if (first.empty()) first = bytes;
      else if (bytes != first) ++bad;
    }
  }
  fs::remove_all(dir);
  o.ok = bad == 0;
  o.detail = fmt("%d/%d runs identical to threads=1", runs - bad, runs);
  return o;
}

// A9: relative energy of SDY-X2 against SR-LUT, x2 to a 1280x720 output.
Outcome a9() {
  Outcome o;
  const double e_sr = estimate_energy(count_ops(preset("SR-LUT", 2), 640, 360));
  const double e_mu = estimate_energy(count_ops(preset("MuLUT-SDY-X2", 2), 640, 360));
  const double ratio = e_mu / e_sr;
  o.ok = std::abs(ratio - 3.75) <= 0.25 * 3.75;
  o.detail = fmt("ratio %.3f (target 3.75 +/- 25%%)", ratio);
  return o;
}

}  // namespace

// Optional arguments select criteria by id, e.g. `mulut_acceptance A3 A6`.
int main(int argc, char** argv) {
  const std::vector<std::string> only(argv + 1, argv + argc);
  struct Criterion {
    const char* id;
    std::function<Outcome()> fn;
    double limit_s;
  };
  const std::vector<Criterion> criteria = {{"A1", a1, 1},  {"A2", a2, 10}, {"A3", a3, 120}, {"A4", a4, 60}, {"A5", a5, 30},
                                           {"A6", a6, 300}, {"A7", a7, 30}, {"A8", a8, 60},   {"A9", a9, 1}};
  int failed = 0;
  for (const auto& [id, fn, limit] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = seconds_since(t0);
    if (secs >= limit) o.ok = false;
    if (!o.ok) ++failed;
    std::printf("%s %s %s [%.2fs, limit %gs]\n", o.ok ? "PASS" : "FAIL", id, o.detail.c_str(), secs, limit);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
