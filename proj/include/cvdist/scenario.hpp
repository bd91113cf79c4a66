#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cvdist/distill.hpp"
#include "cvdist/io.hpp"
#include "cvdist/montecarlo.hpp"

namespace cvdist {

// ---------------------------------------------------------------------------
// Scenario configuration (JSON). Unknown keys are rejected at every level.
// Schema:
// {
//   "source":  {"v_s": .., "v_a": .., "t_s": ..},
//   "channel": {"preset": "erasure", "params": [..], "n_levels": 45}
//              or {"levels": [[eta, p], ...]},
//   "tap":     {"transmittance": .., "thresholds": [..]},
//   "mc":      {"enable": .., "samples": .., "seed": ..},          (optional)
//   "errors":  {"element_sigma": 0.03, "trials": 400},             (optional)
//   "outputs": {"dir": "...", "formats": ["csv"]}
// }
// ---------------------------------------------------------------------------

struct McConfig {
  bool enable = false;
  std::uint64_t samples = 1000000;
  std::uint64_t seed = 20818;
};

struct ErrorModelConfig {
  double element_sigma = 0.03;
  int trials = 400;
};

/// Channel description that remembers how it was specified, so the manifest
/// echo reproduces the configuration verbatim.
struct ChannelSpec {
  std::string preset;            ///< empty when explicit levels are given
  std::vector<double> params;
  int n_levels = 45;
  std::vector<LossChannel::Level> levels;

  LossChannel build() const {
    if (!preset.empty()) {
      return channel_preset(preset, params, n_levels);
    }
    return LossChannel(levels);
  }
};

struct ScenarioConfig {
  SourceParams source;
  ChannelSpec channel;
  double tap_transmittance;
  std::vector<double> thresholds;
  McConfig mc;
  ErrorModelConfig errors;
  std::filesystem::path out_dir;
  std::vector<std::string> formats;
};

namespace detail {

inline void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                       const char* where) {
  if (!j.is_object()) {
    throw FormatError(std::string("config: '") + where + "' must be an object");
  }
  for (const auto& [key, value] : j.items()) {
    if (std::find_if(allowed.begin(), allowed.end(),
                     [&](const char* a) { return key == a; }) == allowed.end()) {
      throw FormatError(std::string("config: unknown key '") + key + "' in " + where);
    }
  }
}

inline double require_number(const nlohmann::json& j, const char* key, const char* where) {
  if (!j.contains(key) || !j.at(key).is_number()) {
    throw FormatError(std::string("config: ") + where + " needs numeric '" + key + "'");
  }
  return j.at(key).get<double>();
}

}  // namespace detail

inline ScenarioConfig parse_scenario_config(const nlohmann::json& j) {
  detail::check_keys(j, {"source", "channel", "tap", "mc", "errors", "outputs"}, "top level");
  for (const char* key : {"source", "channel", "tap", "outputs"}) {
    if (!j.contains(key)) {
      throw FormatError(std::string("config: missing '") + key + "' section");
    }
  }

  const auto& js = j.at("source");
  detail::check_keys(js, {"v_s", "v_a", "t_s"}, "source");
  SourceParams source(detail::require_number(js, "v_s", "source"),
                      detail::require_number(js, "v_a", "source"),
                      detail::require_number(js, "t_s", "source"));

  const auto& jc = j.at("channel");
  detail::check_keys(jc, {"preset", "params", "n_levels", "levels"}, "channel");
  ChannelSpec channel;
  if (jc.contains("preset")) {
    if (jc.contains("levels")) {
      throw FormatError("config: channel takes either 'preset' or 'levels', not both");
    }
    channel.preset = jc.at("preset").get<std::string>();
    if (jc.contains("params")) {
      channel.params = jc.at("params").get<std::vector<double>>();
    }
    if (jc.contains("n_levels")) {
      channel.n_levels = jc.at("n_levels").get<int>();
    }
  } else if (jc.contains("levels")) {
    for (const auto& lv : jc.at("levels")) {
      if (!lv.is_array() || lv.size() != 2) {
        throw FormatError("config: channel levels must be [eta, p] pairs");
      }
      channel.levels.push_back({lv[0].get<double>(), lv[1].get<double>()});
    }
  } else {
    throw FormatError("config: channel needs 'preset' or 'levels'");
  }
  channel.build();  // validate now so config errors surface before any output

  const auto& jt = j.at("tap");
  detail::check_keys(jt, {"transmittance", "thresholds"}, "tap");
  const double tap_t = detail::require_number(jt, "transmittance", "tap");
  if (!jt.contains("thresholds") || !jt.at("thresholds").is_array() ||
      jt.at("thresholds").empty()) {
    throw FormatError("config: tap.thresholds must be a nonempty array");
  }
  std::vector<double> thresholds = jt.at("thresholds").get<std::vector<double>>();
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (!std::isfinite(thresholds[i])) {
      throw FormatError("config: thresholds must be finite");
    }
    if (i > 0 && !(thresholds[i] > thresholds[i - 1])) {
      throw FormatError("config: thresholds must be strictly ascending");
    }
  }

  McConfig mc;
  if (j.contains("mc")) {
    const auto& jm = j.at("mc");
    detail::check_keys(jm, {"enable", "samples", "seed"}, "mc");
    if (jm.contains("enable")) mc.enable = jm.at("enable").get<bool>();
    if (jm.contains("samples")) mc.samples = jm.at("samples").get<std::uint64_t>();
    if (jm.contains("seed")) mc.seed = jm.at("seed").get<std::uint64_t>();
    if (mc.samples == 0) {
      throw FormatError("config: mc.samples must be positive");
    }
  }

  ErrorModelConfig errors;
  if (j.contains("errors")) {
    const auto& je = j.at("errors");
    detail::check_keys(je, {"element_sigma", "trials"}, "errors");
    if (je.contains("element_sigma")) {
      errors.element_sigma = je.at("element_sigma").get<double>();
    }
    if (je.contains("trials")) errors.trials = je.at("trials").get<int>();
    if (!(errors.element_sigma >= 0.0)) {
      throw FormatError("config: errors.element_sigma must be nonnegative");
    }
    if (errors.trials < 100) {
      throw FormatError("config: errors.trials must be at least 100");
    }
  }

  const auto& jo = j.at("outputs");
  detail::check_keys(jo, {"dir", "formats"}, "outputs");
  if (!jo.contains("dir")) {
    throw FormatError("config: outputs.dir is required");
  }
  std::filesystem::path out_dir = jo.at("dir").get<std::string>();
  std::vector<std::string> formats = {"csv"};
  if (jo.contains("formats")) {
    formats = jo.at("formats").get<std::vector<std::string>>();
    for (const auto& f : formats) {
      if (f != "csv") {
        throw FormatError("config: unsupported output format '" + f + "'");
      }
    }
  }

  return {source, std::move(channel), tap_t, std::move(thresholds),
          mc,     errors,             std::move(out_dir), std::move(formats)};
}

inline nlohmann::json scenario_config_to_json(const ScenarioConfig& cfg) {
  nlohmann::json j;
  j["source"] = {{"v_s", cfg.source.v_s}, {"v_a", cfg.source.v_a}, {"t_s", cfg.source.t_s}};
  if (!cfg.channel.preset.empty()) {
    j["channel"] = {{"preset", cfg.channel.preset},
                    {"params", cfg.channel.params},
                    {"n_levels", cfg.channel.n_levels}};
  } else {
    nlohmann::json levels = nlohmann::json::array();
    for (const auto& l : cfg.channel.levels) {
      levels.push_back({l.eta, l.p});
    }
    j["channel"] = {{"levels", levels}};
  }
  j["tap"] = {{"transmittance", cfg.tap_transmittance}, {"thresholds", cfg.thresholds}};
  j["mc"] = {{"enable", cfg.mc.enable}, {"samples", cfg.mc.samples}, {"seed", cfg.mc.seed}};
  j["errors"] = {{"element_sigma", cfg.errors.element_sigma}, {"trials", cfg.errors.trials}};
  j["outputs"] = {{"dir", cfg.out_dir.string()}, {"formats", cfg.formats}};
  return j;
}

inline ScenarioConfig load_scenario_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw FormatError("cannot open config file: " + path.string());
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("config: invalid JSON: ") + e.what());
  }
  return parse_scenario_config(j);
}

// ---------------------------------------------------------------------------
// Scenario execution.
// ---------------------------------------------------------------------------

namespace detail {

/// Deletes every listed path on destruction unless released; keeps failed
/// runs from leaving partial artifacts behind.
class OutputGuard {
 public:
  void track(const std::filesystem::path& p) { paths_.push_back(p); }
  void release() { paths_.clear(); }
  ~OutputGuard() {
    for (const auto& p : paths_) {
      std::error_code ec;
      std::filesystem::remove(p, ec);
    }
  }

 private:
  std::vector<std::filesystem::path> paths_;
};

inline std::string csv_field(double x) { return format_g17(x); }

/// One pass over a record source, estimating moments and per-component
/// acceptance counts for every threshold at once. Block-sliced exactly like
/// reduce_blocked, so per-threshold results match independent passes bit
/// for bit.
template <class Source>
struct MultiThresholdPass {
  std::vector<MomentAccumulator> moments;
  std::vector<std::vector<std::uint64_t>> accepted_per_component;
  std::vector<std::uint64_t> accepted;
  std::uint64_t total = 0;

  MultiThresholdPass(Source&& source, std::span<const double> thresholds,
                     std::size_t n_components) {
    const std::size_t nt = thresholds.size();
    moments.resize(nt);
    accepted.assign(nt, 0);
    accepted_per_component.assign(nt, std::vector<std::uint64_t>(n_components, 0));
    std::vector<MomentAccumulator> block(nt);
    QuadratureRecord rec;
    while (source.next(rec)) {
      for (std::size_t k = 0; k < nt; ++k) {
        if (rec.x_t >= thresholds[k]) {
          block[k].add(rec);
          ++accepted[k];
          const auto c = static_cast<std::size_t>(rec.component);
          if (c < accepted_per_component[k].size()) {
            ++accepted_per_component[k][c];
          }
        }
      }
      ++total;
      if (total % kRecordBlock == 0) {
        for (std::size_t k = 0; k < nt; ++k) {
          moments[k].merge(block[k]);
          block[k] = MomentAccumulator{};
        }
      }
    }
    for (std::size_t k = 0; k < nt; ++k) moments[k].merge(block[k]);
  }
};

}  // namespace detail

/// Runs a configured scenario and writes its artifacts:
///   sweep.csv                 analytic threshold sweep
///   weights_<k>.csv           posterior weights per threshold
///   manifest.json             config echo, seed, library version
///   records.txt, mc_summary.csv   (only when mc.enable)
/// On failure the partially written files are removed.
inline void run_scenario(const ScenarioConfig& cfg) {
  namespace fs = std::filesystem;
  const LossChannel channel = cfg.channel.build();
  const GaussianMixture mix = mixture_from_channel(cfg.source, channel);

  fs::create_directories(cfg.out_dir);
  detail::OutputGuard guard;

  const auto sweep = threshold_sweep(mix, cfg.tap_transmittance, cfg.thresholds);

  // sweep.csv
  {
    const fs::path path = cfg.out_dir / "sweep.csv";
    guard.track(path);
    std::ofstream out(path);
    out << "x_th,p_success,ln_gaussian,ln_err,lower_bound,upper_bound_before";
    for (std::size_t i = 0; i < mix.size(); ++i) out << ",w_" << i;
    out << '\n';
    for (const auto& row : sweep) {
      const auto n_post = static_cast<std::uint64_t>(
          std::max(2.0, std::floor(row.p_success * static_cast<double>(cfg.mc.samples))));
      const auto err = ln_error_monte_carlo(row.cm_post, cfg.errors.element_sigma, n_post,
                                            cfg.errors.trials, cfg.mc.seed);
      out << detail::csv_field(row.x_th) << ',' << detail::csv_field(row.p_success) << ','
          << detail::csv_field(row.ln_gaussian) << ',' << detail::csv_field(err.ln_std) << ','
          << detail::csv_field(row.lower_bound) << ','
          << detail::csv_field(row.upper_bound_before);
      for (double w : row.posterior_weights) out << ',' << detail::csv_field(w);
      out << '\n';
    }
    if (!out) throw FormatError("write failed: " + path.string());
  }

  // weights_<k>.csv: the weight-evolution panels, one file per threshold
  for (std::size_t k = 0; k < sweep.size(); ++k) {
    const fs::path path = cfg.out_dir / ("weights_" + std::to_string(k) + ".csv");
    guard.track(path);
    std::ofstream out(path);
    out << "eta,prior,posterior\n";
    for (std::size_t i = 0; i < channel.size(); ++i) {
      out << detail::csv_field(channel[i].eta) << ',' << detail::csv_field(channel[i].p)
          << ',' << detail::csv_field(sweep[k].posterior_weights[i]) << '\n';
    }
    if (!out) throw FormatError("write failed: " + path.string());
  }

  // Monte-Carlo validation artifacts
  if (cfg.mc.enable) {
    const TapConfig tap(cfg.tap_transmittance, cfg.thresholds.front());
    const fs::path rec_path = cfg.out_dir / "records.txt";
    guard.track(rec_path);
    {
      RecordStream stream(mix, tap, cfg.mc.samples, cfg.mc.seed);
      write_records(rec_path, stream, scenario_config_to_json(cfg).dump());
    }
    RecordStream stream(mix, tap, cfg.mc.samples, cfg.mc.seed);
    detail::MultiThresholdPass<RecordStream&> pass(stream, cfg.thresholds, mix.size());

    const fs::path path = cfg.out_dir / "mc_summary.csv";
    guard.track(path);
    std::ofstream out(path);
    out << "x_th,n_accepted,acceptance,acceptance_se,ln_empirical,max_abs_z\n";
    for (std::size_t k = 0; k < cfg.thresholds.size(); ++k) {
      const double f =
          static_cast<double>(pass.accepted[k]) / static_cast<double>(pass.total);
      const double fse = std::sqrt(f * (1.0 - f) / static_cast<double>(pass.total));
      double ln_emp = std::numeric_limits<double>::quiet_NaN();
      double max_z = std::numeric_limits<double>::quiet_NaN();
      if (pass.accepted[k] >= 2) {
        const auto est = pass.moments[k].finalize();
        try {
          ln_emp = gaussian_log_negativity(est.cm);
        } catch (const NonPhysical&) {
        }
        max_z = 0.0;
        const auto& analytic = sweep[k].cm_post.matrix();
        for (int i = 0; i < 4; ++i) {
          for (int jj = i; jj < 4; ++jj) {
            const double se = est.se(i, jj);
            if (se > 0.0) {
              max_z = std::max(max_z, std::abs(est.cm(i, jj) - analytic(i, jj)) / se);
            }
          }
        }
      }
      out << detail::csv_field(cfg.thresholds[k]) << ',' << pass.accepted[k] << ','
          << detail::csv_field(f) << ',' << detail::csv_field(fse) << ','
          << detail::csv_field(ln_emp) << ',' << detail::csv_field(max_z) << '\n';
    }
    if (!out) throw FormatError("write failed: " + path.string());
  }

  // manifest.json
  {
    const fs::path path = cfg.out_dir / "manifest.json";
    guard.track(path);
    nlohmann::json manifest;
    manifest["version"] = kVersion;
    manifest["seed"] = cfg.mc.seed;
    manifest["config"] = scenario_config_to_json(cfg);
    std::ofstream out(path);
    out << manifest.dump(2) << '\n';
    if (!out) throw FormatError("write failed: " + path.string());
  }

  guard.release();
}

// ---------------------------------------------------------------------------
// Closed-form vs sampling validation.
// ---------------------------------------------------------------------------

struct McValidationRow {
  double x_th;
  double p_analytic;
  double p_mc;
  double p_se;
  double max_abs_z;    ///< largest |empirical - analytic| / se over the CM
  int within_3se;      ///< CM elements (of 10) agreeing within 3 standard errors
  std::uint64_t accepted;
};

/// Samples the configured scenario once and compares the empirical
/// covariance matrix and acceptance rate against the closed forms at every
/// threshold.
inline std::vector<McValidationRow> mc_validate(const ScenarioConfig& cfg) {
  const LossChannel channel = cfg.channel.build();
  const GaussianMixture mix = mixture_from_channel(cfg.source, channel);
  const auto sweep = threshold_sweep(mix, cfg.tap_transmittance, cfg.thresholds);

  RecordStream stream(mix, TapConfig(cfg.tap_transmittance, cfg.thresholds.front()),
                      cfg.mc.samples, cfg.mc.seed);
  detail::MultiThresholdPass<RecordStream&> pass(stream, cfg.thresholds, mix.size());

  std::vector<McValidationRow> rows;
  rows.reserve(cfg.thresholds.size());
  for (std::size_t k = 0; k < cfg.thresholds.size(); ++k) {
    McValidationRow row{};
    row.x_th = cfg.thresholds[k];
    row.p_analytic = sweep[k].p_success;
    const double n = static_cast<double>(pass.total);
    row.p_mc = static_cast<double>(pass.accepted[k]) / n;
    row.p_se = std::sqrt(row.p_mc * (1.0 - row.p_mc) / n);
    row.accepted = pass.accepted[k];
    row.max_abs_z = std::numeric_limits<double>::quiet_NaN();
    row.within_3se = 0;
    if (pass.accepted[k] >= 2) {
      const auto est = pass.moments[k].finalize();
      const auto& analytic = sweep[k].cm_post.matrix();
      double max_z = 0.0;
      int within = 0;
      for (int i = 0; i < 4; ++i) {
        for (int j = i; j < 4; ++j) {
          const double se = est.se(i, j);
          const double z = se > 0.0 ? std::abs(est.cm(i, j) - analytic(i, j)) / se : 0.0;
          max_z = std::max(max_z, z);
          if (z <= 3.0) ++within;
        }
      }
      row.max_abs_z = max_z;
      row.within_3se = within;
    }
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Experimental-style ingestion: weighted concatenation of record files.
// ---------------------------------------------------------------------------

struct IngestOptions {
  std::vector<std::filesystem::path> files;
  std::vector<double> weights;        ///< envelope, one weight per file
  std::vector<double> thresholds;
  std::filesystem::path out_dir;
  std::uint64_t seed = 1;
  ErrorModelConfig errors;
};

/// Concatenates record files by weighted resampling (each draw picks file i
/// with probability w_i and consumes its next record, until the selected
/// file runs out), then runs the empirical post-selection pipeline per
/// threshold and writes run_scenario-shaped artifacts. The constituent
/// index of the resampled stream is the file index.
inline void ingest_and_distill(const IngestOptions& opt) {
  namespace fs = std::filesystem;
  if (opt.files.empty()) {
    throw FormatError("ingest: no record files given");
  }
  if (opt.files.size() != opt.weights.size()) {
    throw FormatError("ingest: weight envelope length must match file count");
  }
  double wsum = 0.0;
  for (double w : opt.weights) {
    if (!(w >= 0.0)) throw WeightError("ingest: weights must be nonnegative");
    wsum += w;
  }
  if (std::abs(wsum - 1.0) > kTol) {
    throw WeightError("ingest: weights must sum to one");
  }
  if (opt.thresholds.empty()) {
    throw FormatError("ingest: threshold list is empty");
  }

  // Load and check headers.
  std::vector<std::vector<QuadratureRecord>> files;
  files.reserve(opt.files.size());
  std::optional<RecordFileHeader> first_header;
  for (const auto& path : opt.files) {
    FileRecordReader reader(path);
    if (!first_header) {
      first_header = reader.header();
    } else if (!first_header->compatible_with(reader.header())) {
      throw UnitsMismatch("ingest: record files have mismatched headers");
    }
    std::vector<QuadratureRecord> recs;
    QuadratureRecord rec;
    while (reader.next(rec)) recs.push_back(rec);
    if (recs.empty()) {
      throw FormatError("ingest: empty record file " + path.string());
    }
    files.push_back(std::move(recs));
  }

  // Weighted concatenation; stop when the drawn file is exhausted.
  std::vector<double> cum(opt.weights.size());
  double c = 0.0;
  for (std::size_t i = 0; i < opt.weights.size(); ++i) {
    c += opt.weights[i];
    cum[i] = c;
  }
  cum.back() = 1.0;
  struct ResampledSource {
    const std::vector<std::vector<QuadratureRecord>>* files;
    const std::vector<double>* cum;
    BlockRng rng;
    std::vector<std::size_t> pos;
    bool next(QuadratureRecord& rec) {
      const double u = rng.next_unit();
      std::size_t k = 0;
      while (k + 1 < cum->size() && u >= (*cum)[k]) ++k;
      if (pos[k] >= (*files)[k].size()) return false;
      rec = (*files)[k][pos[k]++];
      rec.component = static_cast<std::int32_t>(k);
      return true;
    }
  };
  ResampledSource source{&files, &cum, BlockRng(opt.seed, 0),
                         std::vector<std::size_t>(files.size(), 0)};
  detail::MultiThresholdPass<ResampledSource&> pass(source, opt.thresholds, files.size());

  // Constant pre-selection upper bound from per-file (tapped) estimates.
  double ub_before = std::numeric_limits<double>::quiet_NaN();
  try {
    std::vector<MixtureComponent> comps;
    for (std::size_t i = 0; i < files.size(); ++i) {
      MomentAccumulator acc;
      for (const auto& r : files[i]) acc.add(r);
      comps.push_back({opt.weights[i], acc.finalize().cm});
    }
    ub_before = upper_bound_ln_mixture(comps);
  } catch (const Error&) {
    // leave NaN when an estimate is too noisy to admit a bound
  }

  fs::create_directories(opt.out_dir);
  detail::OutputGuard guard;

  {
    const fs::path path = opt.out_dir / "sweep.csv";
    guard.track(path);
    std::ofstream out(path);
    out << "x_th,p_success,ln_gaussian,ln_err,lower_bound,upper_bound_before";
    for (std::size_t i = 0; i < files.size(); ++i) out << ",w_" << i;
    out << '\n';
    for (std::size_t k = 0; k < opt.thresholds.size(); ++k) {
      const double f =
          static_cast<double>(pass.accepted[k]) / static_cast<double>(pass.total);
      double ln = std::numeric_limits<double>::quiet_NaN();
      double ln_err = std::numeric_limits<double>::quiet_NaN();
      double lb = std::numeric_limits<double>::quiet_NaN();
      if (pass.accepted[k] >= 2) {
        const auto est = pass.moments[k].finalize();
        try {
          ln = gaussian_log_negativity(est.cm);
          ln_err = ln_error_monte_carlo(est.cm, opt.errors.element_sigma,
                                        std::max<std::uint64_t>(2, pass.accepted[k]),
                                        opt.errors.trials, opt.seed)
                       .ln_std;
        } catch (const Error&) {
        }
        try {
          lb = conditional_entropy_lower_bound(est.cm);
        } catch (const Error&) {
        }
      }
      out << detail::csv_field(opt.thresholds[k]) << ',' << detail::csv_field(f) << ','
          << detail::csv_field(ln) << ',' << detail::csv_field(ln_err) << ','
          << detail::csv_field(lb) << ',' << detail::csv_field(ub_before);
      for (std::size_t i = 0; i < files.size(); ++i) {
        const double w = pass.accepted[k] == 0
                             ? std::numeric_limits<double>::quiet_NaN()
                             : static_cast<double>(pass.accepted_per_component[k][i]) /
                                   static_cast<double>(pass.accepted[k]);
        out << ',' << detail::csv_field(w);
      }
      out << '\n';
    }
    if (!out) throw FormatError("write failed: " + path.string());
  }

  for (std::size_t k = 0; k < opt.thresholds.size(); ++k) {
    const fs::path path = opt.out_dir / ("weights_" + std::to_string(k) + ".csv");
    guard.track(path);
    std::ofstream out(path);
    out << "file,prior,posterior\n";
    for (std::size_t i = 0; i < files.size(); ++i) {
      const double w = pass.accepted[k] == 0
                           ? std::numeric_limits<double>::quiet_NaN()
                           : static_cast<double>(pass.accepted_per_component[k][i]) /
                                 static_cast<double>(pass.accepted[k]);
      out << i << ',' << detail::csv_field(opt.weights[i]) << ',' << detail::csv_field(w)
          << '\n';
    }
    if (!out) throw FormatError("write failed: " + path.string());
  }

  {
    const fs::path path = opt.out_dir / "manifest.json";
    guard.track(path);
    nlohmann::json manifest;
    manifest["version"] = kVersion;
    manifest["seed"] = opt.seed;
    nlohmann::json jfiles = nlohmann::json::array();
    for (const auto& f : opt.files) jfiles.push_back(f.string());
    manifest["ingest"] = {{"files", jfiles},
                          {"weights", opt.weights},
                          {"thresholds", opt.thresholds}};
    std::ofstream out(path);
    out << manifest.dump(2) << '\n';
    if (!out) throw FormatError("write failed: " + path.string());
  }

  guard.release();
}

}  // namespace cvdist
