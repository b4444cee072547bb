/* Copyright 2026 The ConvLab Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "convlab/algos.hpp"
#include "convlab/analysis.hpp"
#include "convlab/interp.hpp"
#include "convlab/machine.hpp"
#include "convlab/oracle.hpp"
#include "convlab/report.hpp"
#include "convlab/sim.hpp"
#include "convlab/tuner.hpp"

namespace {

using namespace convlab;

constexpr int kExitOk = 0;
constexpr int kExitVerifyFail = 1;
constexpr int kExitUsage = 2;
constexpr int kExitLaunch = 3;

std::vector<AlgoKind> parse_algos(const std::string& arg) {
  std::vector<AlgoKind> out;
  std::string cur;
  std::stringstream ss(arg);
  while (std::getline(ss, cur, ',')) {
    if (cur == "all") {
      return {AlgoKind::im2col, AlgoKind::fused_unroll, AlgoKind::winograd,
              AlgoKind::direct_cache, AlgoKind::direct_nocache, AlgoKind::ilpm};
    }
    out.push_back(algo_from_name(cur));
  }
  if (out.empty()) throw ConfigError("no algorithms given");
  return out;
}

std::vector<std::string> parse_layers(const std::string& arg) {
  std::vector<std::string> out;
  std::string cur;
  std::stringstream ss(arg);
  while (std::getline(ss, cur, ',')) {
    if (cur == "all") {
      out.clear();
      for (const LayerSpec& l : resnet_layers()) out.push_back(l.name);
      return out;
    }
    (void)layer_by_name(cur);  // validate
    out.push_back(cur);
  }
  if (out.empty()) throw ConfigError("no layers given");
  return out;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open output file: " + path);
  f << content;
}

int cmd_verify(std::uint64_t seed, int scale) {
  if (scale != 8 && scale != 16 && scale != 32 && scale != 64) {
    throw ConfigError("scale must be one of 8, 16, 32, 64");
  }
  Rng rng(seed);
  bool ok = true;
  for (const LayerSpec& layer : resnet_layers()) {
    const ConvShape shape = layer_shape(layer, scale);
    Tensor input = Tensor::chw(shape.in_channels, shape.height, shape.width);
    Tensor filters = Tensor::kcrs(shape.out_channels, shape.in_channels, 3, 3);
    input.fill_random(rng);
    filters.fill_random(rng);
    const Tensor want = oracle_conv(input, filters, shape).output;
    for (AlgoKind a : {AlgoKind::im2col, AlgoKind::fused_unroll,
                       AlgoKind::winograd, AlgoKind::direct_cache,
                       AlgoKind::direct_nocache, AlgoKind::ilpm}) {
      const AlgoConfig cfg = default_config(a, shape);
      const AlgoResult r = run_algorithm(cfg, input, filters, shape);
      double max_rel = 0;
      std::int64_t worst = 0;
      for (std::int64_t i = 0; i < want.size(); ++i) {
        const double w = want.data()[i];
        const double rel =
            std::abs(r.output.data()[i] - w) / std::max(1.0, std::abs(w));
        if (rel > max_rel) {
          max_rel = rel;
          worst = i;
        }
      }
      const double tol = a == AlgoKind::winograd ? 1e-3 : 1e-4;
      const bool pass = max_rel <= tol;
      std::printf("%-8s %-14s max_rel_err=%.3e %s\n", layer.name.c_str(),
                  algo_name(a), max_rel, pass ? "ok" : "FAIL");
      if (!pass) {
        ok = false;
        std::printf("  failing flat index %lld: got %.8g want %.8g\n",
                    static_cast<long long>(worst),
                    static_cast<double>(r.output.data()[worst]),
                    static_cast<double>(want.data()[worst]));
      }
    }
  }
  return ok ? kExitOk : kExitVerifyFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"convolution algorithm laboratory with a simulated GPU machine model"};
  app.require_subcommand(1);

  std::uint64_t seed = 1;
  int scale = 64;
  std::string machine_arg = "integrated";
  std::string layers_arg = "all";
  std::string algos_arg = "all";
  std::string out_path;
  std::string plot_path;
  std::string algo_arg = "ilpm";
  std::string layer_arg = "conv4.x";

  auto* verify = app.add_subcommand("verify", "run all algorithms against the oracle");
  verify->add_option("--seed", seed, "rng seed");
  verify->add_option("--scale", scale, "channel scale (8|16|32|64)");

  auto* report = app.add_subcommand("report", "simulate kernels and write metric rows");
  report->add_option("--layers", layers_arg, "comma list or 'all'");
  report->add_option("--algos", algos_arg, "comma list or 'all'");
  report->add_option("--machine", machine_arg, "dedicated|integrated|embedded|file");
  report->add_option("--scale", scale, "channel scale for simulation");
  report->add_option("--seed", seed, "rng seed (kept in the header for traceability)");
  report->add_option("--out", out_path, "output CSV path")->required();
  report->add_option("--plot", plot_path, "also write plot data (algorithm, cycles)");

  auto* tune = app.add_subcommand("tune", "exhaustive config search for one algorithm");
  tune->add_option("--algo", algo_arg, "algorithm name");
  tune->add_option("--layer", layer_arg, "layer name");
  tune->add_option("--machine", machine_arg, "dedicated|integrated|embedded|file");
  tune->add_option("--scale", scale, "channel scale");
  tune->add_option("--out", out_path, "audit CSV path");

  auto* dump = app.add_subcommand("dump-ir", "serialize a lowered kernel pipeline");
  dump->add_option("--algo", algo_arg, "algorithm name");
  dump->add_option("--layer", layer_arg, "layer name");
  dump->add_option("--scale", scale, "channel scale");
  dump->add_option("--out", out_path, "output path (stdout if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (verify->parsed()) {
      return cmd_verify(seed, scale);
    }
    if (report->parsed()) {
      ReportRequest req;
      req.layers = parse_layers(layers_arg);
      req.algorithms = parse_algos(algos_arg);
      req.machine = machine_from_arg(machine_arg);
      req.sim_channel_scale = scale;
      write_file(out_path, generate_report_csv(req));
      if (!plot_path.empty()) write_file(plot_path, generate_plot_data(req));
      std::printf("wrote %s\n", out_path.c_str());
      return kExitOk;
    }
    if (tune->parsed()) {
      const AlgoKind a = algo_from_name(algo_arg);
      const ConvShape shape = layer_shape(layer_by_name(layer_arg), scale);
      const MachineConfig m = machine_from_arg(machine_arg);
      const TuneResult r = convlab::tune(a, shape, m);
      std::printf("best: %s cycles=%llu\n", r.best.describe().c_str(),
                  static_cast<unsigned long long>(r.best_metrics.cycles));
      int skipped = 0;
      for (const Trial& t : r.trials) skipped += t.skipped ? 1 : 0;
      std::printf("trials: %zu (%d skipped)\n", r.trials.size(), skipped);
      if (!out_path.empty()) write_file(out_path, tune_audit_csv(r));
      return kExitOk;
    }
    if (dump->parsed()) {
      const AlgoKind a = algo_from_name(algo_arg);
      const ConvShape shape = layer_shape(layer_by_name(layer_arg), scale);
      const std::string text = serialize(lower(default_config(a, shape), shape));
      if (out_path.empty()) {
        std::fputs(text.c_str(), stdout);
      } else {
        write_file(out_path, text);
      }
      return kExitOk;
    }
  } catch (const LaunchError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitLaunch;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitVerifyFail;
  }
  return kExitUsage;
}
