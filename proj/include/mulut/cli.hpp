// SPDX-FileCopyrightText: © 2026 The mulut Authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

//
// The `mulut` command line, callable in-process:
//
//   mulut run      --preset NAME --scale R --lut-dir DIR | --config FILE
//                  --input IMG... --output PATH [--threads N]
//   mulut convert  --function ID --q Q --pattern P [--scale R] [--role ROLE] --out FILE
//   mulut convert  --validate FILE [--pattern P | --channel] [--q Q] [--scale R]
//   mulut convert  --preset NAME --scale R --out DIR [--function ID] [--q Q]
//   mulut finetune --config FILE --data LQ_DIR,HQ_DIR --out DIR
//                  [--iters 2000] [--lr 1e-4] [--seed S] [--batch 8] [--patch 48]
//   mulut eval     --metric psnr|cpsnr|ssim|psnrb [--y-channel] A B [A B ...]
//   mulut degrade  --kind bicubic|awgn|bayer [--scale R] [--sigma S] [--seed S]
//                  --input IMG --output IMG
//   mulut cost     --preset NAME [--scale R] | --config FILE --size WxH [--csv]
//
// Exit status: 0 ok, 1 I/O failure, 2 malformed command line, 3 validation
// failure. MULUT_SEED supplies --seed when the flag is absent.
//

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mulut/cost.hpp"
#include "mulut/engine.hpp"
#include "mulut/error.hpp"
#include "mulut/finetune.hpp"
#include "mulut/image.hpp"
#include "mulut/lut.hpp"
#include "mulut/metrics.hpp"
#include "mulut/pipeline.hpp"
#include "mulut/transfer.hpp"

namespace mulut::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitIo = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitInvalid = 3;

namespace fs = std::filesystem;

namespace detail {

struct Usage : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("MULUT_SEED")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0') throw Usage("MULUT_SEED must be an unsigned integer");
    return v;
  }
  return 0;
}

inline std::string format_db(double v) {
  if (std::isinf(v)) return "inf";
  std::ostringstream os;
  os << std::fixed << std::setprecision(6) << v;
  return os.str();
}

inline std::pair<int, int> parse_size(const std::string& s) {
  const auto x = s.find('x');
  try {
    if (x == std::string::npos) throw Usage("");
    std::size_t p1 = 0, p2 = 0;
    const int w = std::stoi(s.substr(0, x), &p1);
    const int h = std::stoi(s.substr(x + 1), &p2);
    if (p1 != x || p2 != s.size() - x - 1 || w < 1 || h < 1) throw Usage("");
    return {w, h};
  } catch (...) {
    throw Usage("--size must look like WIDTHxHEIGHT, got '" + s + "'");
  }
}

inline LutRole parse_role(const std::string& s) {
  if (s == "intermediate") return LutRole::kSpatialIntermediate;
  if (s == "output") return LutRole::kSpatialOutput;
  if (s == "channel") return LutRole::kChannel;
  throw Usage("--role must be intermediate, output or channel");
}

// Demosaic presets are named by their frontend factor.
inline int default_scale(const std::string& name) {
  return name == "MuLUT-SDY-X2-C" || name.rfind("Baseline-", 0) == 0 ? 2 : 1;
}

struct PipelineArgs {
  std::string config;
  std::string preset;
  int scale = 0;
  int q = 4;
  std::string lut_dir;
};

inline void add_pipeline_flags(CLI::App* sub, PipelineArgs& a) {
  sub->add_option("--config", a.config, "pipeline configuration file");
  sub->add_option("--preset", a.preset, "named preset");
  sub->add_option("--scale", a.scale, "preset scale");
  sub->add_option("--q", a.q, "sampling interval exponent for presets");
  sub->add_option("--lut-dir", a.lut_dir, "directory holding a preset's tables");
}

inline PipelineSpec load_pipeline(const PipelineArgs& a, bool load_tables) {
  if (a.config.empty() == a.preset.empty()) throw Usage("give exactly one of --config and --preset");
  if (!a.config.empty()) {
    if (!fs::exists(a.config)) throw Error(Errc::kIo, "no such file: " + a.config);
    return load_config(a.config, load_tables);
  }
  PipelineSpec spec = preset(a.preset, a.scale == 0 ? default_scale(a.preset) : a.scale, a.q);
  if (load_tables) {
    if (a.lut_dir.empty()) throw Usage("--preset needs --lut-dir to find its tables");
    assign_default_lut_paths(spec, a.lut_dir);
    load_luts(spec);
  }
  return spec;
}

inline std::vector<fs::path> list_images(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(Errc::kIo, "not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto ext = e.path().extension();
    if (e.is_regular_file() && (ext == ".pgm" || ext == ".ppm")) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Analytic tables for every block of `spec`: `fn` for spatial blocks
// (replicated over output channels), identity for channel blocks.
inline void bind_analytic(PipelineSpec& spec, const std::string& fn) {
  for (auto& st : spec.stages) {
    for (auto& b : st.blocks) {
      const BuiltinFunction f = builtin_function(fn, b.upscale);
      if (f.n != 4) throw Usage("--function " + fn + " is not a spatial function");
      const int c_out = b.out_channels;
      const BlockFunction wide = [&f, c_out](std::span<const int> in, std::span<double> out) {
        f.fn(in, out.first(static_cast<std::size_t>(f.m)));
        for (int c = 1; c < c_out; ++c)
          std::copy_n(out.begin(), f.m, out.begin() + static_cast<std::ptrdiff_t>(c) * f.m);
      };
      const auto t = std::make_shared<const LutTable>(cache_function(wide, 4, b.m(), b.q));
      b.luts.assign(static_cast<std::size_t>(b.copies), t);
    }
    if (st.channel) {
      const BuiltinFunction f = builtin_function("identity-rgb");
      st.channel->luts = {std::make_shared<const LutTable>(cache_function(f.fn, 3, 3, st.channel->q))};
    }
  }
}

inline int cmd_run(const PipelineArgs& pa, const std::vector<std::string>& inputs, const std::string& output,
                   int threads, std::ostream& out) {
  const PipelineSpec spec = load_pipeline(pa, true);
  if (inputs.empty()) throw Usage("run needs at least one --input");
  const bool many = inputs.size() > 1 || fs::is_directory(output);
  if (many) fs::create_directories(output);
  for (const auto& in : inputs) {
    const ImagePlane img = read_pnm(in);
    const ImagePlane res = run_pipeline(spec, img, threads);
    fs::path dst = output;
    if (many) dst = fs::path(output) / fs::path(in).filename().replace_extension(res.channels() == 1 ? ".pgm" : ".ppm");
    write_pnm(dst, res);
    out << in << " -> " << dst.string() << " (" << res.width() << "x" << res.height() << ")\n";
  }
  return kExitOk;
}

struct ConvertArgs {
  std::string function;
  std::string validate;
  std::string preset;
  std::string pattern;
  bool channel = false;
  int q = 4;
  int scale = 0;
  std::string role;
  std::string out;
  bool allow_constant = false;
};

inline int cmd_convert(const ConvertArgs& a, std::ostream& out, std::ostream& err) {
  // With --preset, --function picks the function filling its tables.
  const int modes = !a.validate.empty() + (!a.preset.empty() || !a.function.empty());
  if (modes != 1) throw Usage("give one of --function, --validate and --preset");
  if (a.q < 0 || a.q > kMaxBits) throw Usage("--q must be in [0, 8]");

  if (!a.validate.empty()) {
    const auto bytes = read_file_bytes(a.validate);
    if (a.pattern.empty() && !a.channel) {
      const LutFile f = read_lut(bytes);
      out << a.validate << ": ok (n=" << f.table.n() << " m=" << f.table.m() << " q=" << f.table.q()
          << " r=" << f.upscale << " pattern=" << (f.pattern ? std::string(1, f.pattern->id()) : std::string("-")) << ")\n";
      return kExitOk;
    }
    BlockSpec expected;
    if (a.channel) {
      expected = BlockSpec::channel(a.q);
    } else {
      if (a.pattern.size() != 1 || !patterns::builtin(a.pattern[0])) throw Usage("--pattern must be one of S D Y E H O");
      expected = BlockSpec::spatial(*patterns::builtin(a.pattern[0]), std::max(a.scale, 1), 1, a.q);
    }
    std::optional<LutRole> role;
    if (!a.role.empty()) role = parse_role(a.role);
    const auto diags = validate_import(bytes, expected, role, a.allow_constant);
    if (diags.empty()) {
      out << a.validate << ": ok\n";
      return kExitOk;
    }
    for (const auto& d : diags) err << a.validate << ": " << d << "\n";
    return kExitInvalid;
  }

  if (a.out.empty()) throw Usage("--out is required");
  if (!a.preset.empty()) {
    PipelineSpec spec = preset(a.preset, a.scale == 0 ? default_scale(a.preset) : a.scale, a.q);
    bind_analytic(spec, a.function.empty() ? "copy-anchor" : a.function);
    write_pipeline(a.out, spec);
    out << "wrote " << a.preset << " tables and pipeline.cfg to " << a.out << "\n";
    return kExitOk;
  }

  const int r = std::max(a.scale, 1);
  const BuiltinFunction f = builtin_function(a.function, r);
  const LutTable table = cache_function(f.fn, f.n, f.m, a.q);
  LutFile file{table, std::nullopt, LutRole::kChannel, 1};
  if (f.n == 4) {
    const std::string p = a.pattern.empty() ? "S" : a.pattern;
    if (p.size() != 1 || !patterns::builtin(p[0])) throw Usage("--pattern must be one of S D Y E H O");
    file.pattern = *patterns::builtin(p[0]);
    file.upscale = r;
    file.role = a.role.empty() ? (r > 1 ? LutRole::kSpatialOutput : LutRole::kSpatialIntermediate) : parse_role(a.role);
  }
  save_lut(a.out, file);
  out << "wrote " << a.out << " (" << kHeaderBytes + table.values().size() << " bytes)\n";
  return kExitOk;
}

struct FinetuneArgs {
  std::string config;
  std::string data;
  int iters = 2000;
  double lr = 1e-4;
  std::optional<std::uint64_t> seed;
  int batch = 8;
  int patch = 48;
  int threads = 0;
  std::string out;
};

inline int cmd_finetune(const FinetuneArgs& a, std::ostream& out) {
  if (a.config.empty() || a.data.empty() || a.out.empty()) throw Usage("finetune needs --config, --data and --out");
  if (a.iters < 0 || a.batch < 1 || a.patch < 2 || !(a.lr >= 0)) throw Usage("finetune: invalid --iters/--batch/--patch/--lr");
  const auto comma = a.data.find(',');
  if (comma == std::string::npos) throw Usage("--data must be LQ_DIR,HQ_DIR");
  const fs::path lq_dir = a.data.substr(0, comma), hq_dir = a.data.substr(comma + 1);
  if (!fs::exists(a.config)) throw Error(Errc::kIo, "no such file: " + a.config);
  const PipelineSpec spec = load_config(a.config, true);

  std::vector<Sample> data;
  for (const auto& p : list_images(lq_dir)) {
    const fs::path hq = hq_dir / p.filename();
    if (!fs::exists(hq)) throw Error(Errc::kIo, "no high-quality counterpart for " + p.string());
    data.push_back(Sample{read_pnm(p), read_pnm(hq)});
  }
  if (data.empty()) throw Error(Errc::kIo, "no PGM/PPM images in " + lq_dir.string());

  FinetuneOptions opt;
  opt.iters = a.iters;
  opt.lr = a.lr;
  opt.seed = resolve_seed(a.seed);
  opt.batch = a.batch;
  opt.patch = a.patch;
  opt.threads = a.threads;
  FinetuneState state(spec);
  const FinetuneResult res = finetune(spec, state, data, opt);
  write_pipeline(a.out, state.bind(spec));
  write_trace_csv(fs::path(a.out) / "loss.csv", res.trace);
  out << "finetuned " << res.trace.size() << " iterations";
  if (!res.trace.empty()) out << ", loss " << res.trace.front() << " -> " << res.trace.back();
  out << "; wrote " << a.out << "\n";
  return kExitOk;
}

inline int cmd_eval(const std::string& metric, bool y, const std::vector<std::string>& files, std::ostream& out) {
  if (files.empty() || files.size() % 2 != 0) throw Usage("eval takes image pairs: A B [A B ...]");
  double sum = 0.0;
  for (std::size_t i = 0; i < files.size(); i += 2) {
    ImagePlane a = read_pnm(files[i]);
    ImagePlane b = read_pnm(files[i + 1]);
    if (y) {
      a = y_channel(a);
      b = y_channel(b);
    }
    double v = 0.0;
    if (metric == "psnr") v = psnr(a, b);
    else if (metric == "cpsnr") v = cpsnr(a, b);
    else if (metric == "ssim") v = ssim(a, b);
    else if (metric == "psnrb") v = psnr_b(a, b);
    else throw Usage("--metric must be psnr, cpsnr, ssim or psnrb");
    sum += v;
    if (files.size() == 2) {
      out << format_db(v) << "\n";
    } else {
      out << files[i] << ' ' << files[i + 1] << ' ' << format_db(v) << "\n";
    }
  }
  if (files.size() > 2) out << "mean " << format_db(sum / static_cast<double>(files.size() / 2)) << "\n";
  return kExitOk;
}

inline int cmd_degrade(const std::string& kind, int scale, double sigma, const std::optional<std::uint64_t>& seed,
                       const std::string& input, const std::string& output, std::ostream& out) {
  if (input.empty() || output.empty()) throw Usage("degrade needs --input and --output");
  Degradation d;
  if (kind == "bicubic") d.kind = DegradeKind::kBicubic;
  else if (kind == "awgn") d.kind = DegradeKind::kAwgn;
  else if (kind == "bayer") d.kind = DegradeKind::kBayer;
  else throw Usage("--kind must be bicubic, awgn or bayer");
  d.scale = scale;
  d.sigma = sigma;
  d.seed = resolve_seed(seed);
  const ImagePlane res = degrade(read_pnm(input), d);
  write_pnm(output, res);
  out << input << " -> " << output << "\n";
  return kExitOk;
}

inline int cmd_cost(const PipelineArgs& pa, const std::string& size, bool csv, std::ostream& out) {
  const PipelineSpec spec = load_pipeline(pa, false);
  const auto [w, h] = parse_size(size);
  const OpCounts c = count_ops(spec, w, h);
  out << (csv ? cost_report_csv(c) : cost_report_table(c));
  return kExitOk;
}

}  // namespace detail

/// Runs one command line; diagnostics go to `err`.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"mulut: multi-LUT image restoration engine", "mulut"};
  app.require_subcommand(1);

  detail::PipelineArgs run_p;
  std::vector<std::string> run_inputs;
  std::string run_output;
  int threads = 0;
  auto* run = app.add_subcommand("run", "execute a pipeline on images");
  detail::add_pipeline_flags(run, run_p);
  run->add_option("--input", run_inputs, "input PGM/PPM files")->expected(1, -1);
  run->add_option("--output", run_output, "output file, or directory for several inputs")->required();
  run->add_option("--threads", threads, "worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);

  detail::ConvertArgs conv;
  auto* convert = app.add_subcommand("convert", "build or validate MULUT1 tables");
  convert->add_option("--function", conv.function, "builtin block function");
  convert->add_option("--validate", conv.validate, "MULUT1 file to check");
  convert->add_option("--preset", conv.preset, "write analytic tables for a whole preset");
  convert->add_option("--pattern", conv.pattern, "pattern id");
  convert->add_flag("--channel", conv.channel, "validate as a channel table");
  convert->add_option("--q", conv.q, "sampling interval exponent");
  convert->add_option("--scale", conv.scale, "upscale factor r");
  convert->add_option("--role", conv.role, "intermediate | output | channel");
  convert->add_flag("--allow-constant", conv.allow_constant, "accept constant payloads");
  convert->add_option("--out", conv.out, "output file (directory with --preset)");

  detail::FinetuneArgs ft;
  std::uint64_t ft_seed = 0;
  auto* fine = app.add_subcommand("finetune", "LUT-aware finetuning on paired images");
  fine->add_option("--config", ft.config, "pipeline configuration");
  fine->add_option("--data", ft.data, "LQ_DIR,HQ_DIR");
  fine->add_option("--iters", ft.iters, "iterations");
  fine->add_option("--lr", ft.lr, "Adam learning rate");
  auto* ft_seed_opt = fine->add_option("--seed", ft_seed, "patch sampling seed");
  fine->add_option("--batch", ft.batch, "patches per iteration");
  fine->add_option("--patch", ft.patch, "low-quality patch side");
  fine->add_option("--threads", ft.threads, "worker threads");
  fine->add_option("--out", ft.out, "output directory");

  std::string metric = "psnr";
  bool y = false;
  std::vector<std::string> eval_files;
  auto* eval = app.add_subcommand("eval", "image quality metrics");
  eval->add_option("--metric", metric, "psnr | cpsnr | ssim | psnrb");
  eval->add_flag("--y-channel", y, "score the BT.601 luma only");
  eval->add_option("pairs", eval_files, "image pairs");

  std::string kind;
  int dscale = 2;
  double sigma = 0.0;
  std::uint64_t dseed = 0;
  std::string din, dout;
  auto* deg = app.add_subcommand("degrade", "synthetic degradations");
  deg->add_option("--kind", kind, "bicubic | awgn | bayer")->required();
  deg->add_option("--scale", dscale, "bicubic factor");
  deg->add_option("--sigma", sigma, "noise level");
  auto* dseed_opt = deg->add_option("--seed", dseed, "noise seed");
  deg->add_option("--input", din, "input image");
  deg->add_option("--output", dout, "output image");

  detail::PipelineArgs cost_p;
  std::string size;
  bool csv = false;
  auto* cost = app.add_subcommand("cost", "operation counts and energy");
  detail::add_pipeline_flags(cost, cost_p);
  cost->add_option("--size", size, "input size WxH")->required();
  cost->add_flag("--csv", csv, "CSV output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "mulut: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*run) return detail::cmd_run(run_p, run_inputs, run_output, threads, out);
    if (*convert) return detail::cmd_convert(conv, out, err);
    if (*fine) {
      if (*ft_seed_opt) ft.seed = ft_seed;
      return detail::cmd_finetune(ft, out);
    }
    if (*eval) return detail::cmd_eval(metric, y, eval_files, out);
    if (*deg) {
      std::optional<std::uint64_t> s;
      if (*dseed_opt) s = dseed;
      return detail::cmd_degrade(kind, dscale, sigma, s, din, dout, out);
    }
    if (*cost) return detail::cmd_cost(cost_p, size, csv, out);
  } catch (const detail::Usage& e) {
    err << "mulut: " << e.what() << "\n" << app.help();
    return kExitUsage;
  } catch (const Error& e) {
    err << "mulut: " << errc_name(e.code()) << ": " << e.what() << "\n";
    return e.code() == Errc::kIo ? kExitIo : kExitInvalid;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "mulut: io: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitUsage;
}

}  // namespace mulut::cli
