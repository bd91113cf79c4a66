// Command-line front end: threshold sweeps, Monte-Carlo validation,
// record-file ingestion and channel-preset inspection.

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cvdist/scenario.hpp"

namespace {

cvdist::ScenarioConfig load_config(const std::string& path, const std::string& out_override,
                                   std::uint64_t seed, bool seed_set) {
  auto cfg = cvdist::load_scenario_config(path);
  if (!out_override.empty()) cfg.out_dir = out_override;
  if (seed_set) cfg.mc.seed = seed;
  return cfg;
}

int run_sweep(const std::string& config_path, const std::string& out_override,
              std::uint64_t seed, bool seed_set) {
  const auto cfg = load_config(config_path, out_override, seed, seed_set);
  cvdist::run_scenario(cfg);
  std::cout << "wrote sweep artifacts to " << cfg.out_dir.string() << "\n";
  return 0;
}

int run_mc_validate(const std::string& config_path, std::uint64_t samples, std::uint64_t seed,
                    bool seed_set) {
  auto cfg = cvdist::load_scenario_config(config_path);
  if (samples > 0) cfg.mc.samples = samples;
  if (seed_set) cfg.mc.seed = seed;
  const auto rows = cvdist::mc_validate(cfg);
  std::cout << "x_th  P_S(analytic)  P_S(mc)  z(P_S)  cm_within_3se  max|z|  accepted\n";
  int total = 0;
  int passed = 0;
  for (const auto& r : rows) {
    const double pz = r.p_se > 0.0 ? std::abs(r.p_mc - r.p_analytic) / r.p_se : 0.0;
    std::cout << r.x_th << "  " << r.p_analytic << "  " << r.p_mc << "  " << pz << "  "
              << r.within_3se << "/10  " << r.max_abs_z << "  " << r.accepted;
    if (r.accepted < 100) {
      std::cout << "  (inconclusive: too few accepted records, raise --samples)\n";
      continue;
    }
    std::cout << "\n";
    total += 11;
    passed += r.within_3se + (pz <= 3.0 ? 1 : 0);
  }
  if (total == 0) {
    std::cout << "no conclusive threshold rows; raise --samples\n";
    return 1;
  }
  const double frac = static_cast<double>(passed) / total;
  std::cout << "agreement: " << passed << "/" << total << " comparisons within 3 SE\n";
  return frac >= 0.95 ? 0 : 1;
}

int run_ingest(const std::vector<std::string>& files, const std::vector<double>& weights,
               const std::vector<double>& thresholds, const std::string& out,
               std::uint64_t seed) {
  cvdist::IngestOptions opt;
  for (const auto& f : files) opt.files.emplace_back(f);
  opt.weights = weights;
  opt.thresholds = thresholds;
  opt.out_dir = out;
  opt.seed = seed;
  cvdist::ingest_and_distill(opt);
  std::cout << "wrote ingest artifacts to " << out << "\n";
  return 0;
}

int run_presets(const std::string& name, const std::vector<double>& params, int levels) {
  if (name.empty()) {
    std::cout << "erasure(eta_hi, eta_lo, p_hi)\n"
              << "uniform45()\n"
              << "one_peak(center, width)\n"
              << "two_peak(center1, width1, center2, width2, ratio)\n"
              << "exp_decay(rate)\n";
    return 0;
  }
  const auto channel = cvdist::channel_preset(name, params, levels);
  std::cout << "eta,p\n";
  for (const auto& l : channel.levels()) {
    std::cout << cvdist::format_g17(l.eta) << ',' << cvdist::format_g17(l.p) << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"continuous-variable entanglement transmission and distillation simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_override;
  std::uint64_t seed = 0;
  bool seed_set = false;
  auto add_seed = [&](CLI::App* cmd) {
    cmd->add_option_function<std::uint64_t>(
        "--seed",
        [&](std::uint64_t s) {
          seed = s;
          seed_set = true;
        },
        "override the configured random seed");
  };

  auto* sweep = app.add_subcommand("sweep", "run a configured threshold sweep");
  sweep->add_option("--config", config_path, "scenario config (JSON)")->required();
  sweep->add_option("--out", out_override, "override the output directory");
  add_seed(sweep);

  std::uint64_t samples = 0;
  auto* mcv = app.add_subcommand("mc-validate",
                                 "compare closed forms against Monte-Carlo sampling");
  mcv->add_option("--config", config_path, "scenario config (JSON)")->required();
  mcv->add_option("--samples", samples, "override mc.samples");
  add_seed(mcv);

  std::vector<std::string> record_files;
  std::vector<double> envelope;
  std::vector<double> thresholds;
  std::string ingest_out;
  std::uint64_t ingest_seed = 1;
  auto* ingest = app.add_subcommand("ingest", "weighted concatenation of record files");
  ingest->add_option("--records", record_files, "record files")->required();
  ingest->add_option("--weights", envelope, "weight envelope, one per file")->required();
  ingest->add_option("--thresholds", thresholds, "herald thresholds")->required();
  ingest->add_option("--out", ingest_out, "output directory")->required();
  ingest->add_option("--seed", ingest_seed, "resampling seed");

  std::string preset_name;
  std::vector<double> preset_params;
  int preset_levels = 45;
  auto* presets = app.add_subcommand("presets", "list presets or print a channel");
  presets->add_option("--name", preset_name, "preset name");
  presets->add_option("--params", preset_params, "preset parameters");
  presets->add_option("--levels", preset_levels, "grid size for multi-level presets");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sweep->parsed()) return run_sweep(config_path, out_override, seed, seed_set);
    if (mcv->parsed()) return run_mc_validate(config_path, samples, seed, seed_set);
    if (ingest->parsed()) {
      return run_ingest(record_files, envelope, thresholds, ingest_out, ingest_seed);
    }
    if (presets->parsed()) return run_presets(preset_name, preset_params, preset_levels);
  } catch (const cvdist::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
