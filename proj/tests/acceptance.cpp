// Acceptance suite. Each test case evaluates one release criterion at its
// stated tolerance and prints a single PASS/FAIL line (plus sub-check
// detail where a criterion bundles several claims).

#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <random>

#include "cvdist/distill.hpp"
#include "cvdist/montecarlo.hpp"
#include "cvdist/scenario.hpp"
#include "helpers.hpp"

using namespace cvdist;

namespace {

constexpr double kLog2_2_8 = 1.4854268271702418;

void report(int criterion, bool pass, const std::string& detail) {
  std::printf("criterion %d: %s  [%s]\n", criterion, detail.c_str(),
              pass ? "PASS" : "FAIL");
  std::fflush(stdout);
}

std::vector<double> threshold_grid(double lo, double hi, double step) {
  std::vector<double> out;
  for (double x = lo; x <= hi + 1e-12; x += step) out.push_back(x);
  return out;
}

GaussianMixture blocked_channel_mixture(double v_a) {
  return mixture_from_channel(SourceParams(0.1, v_a, 0.5),
                              LossChannel({{0.0, 0.8}, {1.0, 0.2}}));
}

double elapsed_s(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

TEST_CASE("criterion 1: mixture covariance equals the averaged-attenuation form") {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937 gen(160218);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const auto state = testutil::random_state(gen);
    const auto ch = testutil::random_channel(gen);
    const auto direct = mixture_cm(mixture_from_channel(state.source, ch));
    const auto averaged = mixture_cm_via_averages(state.source, ch);
    worst = std::max(worst, (direct.matrix() - averaged.matrix()).cwiseAbs().maxCoeff());
  }
  const double dt = elapsed_s(t0);
  const bool pass = worst <= 1e-12 && dt < 1.0;
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "averaged-attenuation identity over 100 random channels "
                "(max diff %.2e, %.3f s)", worst, dt);
  report(1, pass, detail);
  CHECK(worst <= 1e-12);
  CHECK(dt < 1.0);
}

TEST_CASE("criterion 2: blocked-channel distillation with a pure input") {
  const auto t0 = std::chrono::steady_clock::now();
  const auto mix = blocked_channel_mixture(10.0);  // V_A = 1/V_S
  const auto grid = threshold_grid(0.0, 12.0, 0.25);
  const auto rows = threshold_sweep(mix, 0.7, grid);

  const double ub = rows.front().upper_bound_before;
  const bool ub_ok = std::abs(ub - kLog2_2_8) <= 1e-6;

  bool monotone = true;
  double worst_dip = 0.0;   // maximum drawdown of the LN curve
  double dip_at = 0.0;
  double running_max = rows.front().ln_gaussian;
  double running_max_at = rows.front().x_th;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    const double drop = running_max - rows[k].ln_gaussian;
    if (drop > 1e-12) {
      monotone = false;
      if (drop > worst_dip) {
        worst_dip = drop;
        dip_at = running_max_at;
      }
    }
    if (rows[k].ln_gaussian > running_max) {
      running_max = rows[k].ln_gaussian;
      running_max_at = rows[k].x_th;
    }
  }

  bool crossed = false;
  double p_at_crossing = -1.0;
  for (const auto& row : rows) {
    if (row.ln_gaussian >= ub) {
      crossed = true;
      p_at_crossing = row.p_success;
      break;
    }
  }
  const bool crossing_ok = crossed && p_at_crossing > 0.0 && p_at_crossing < 0.5;

  bool lower_exceeds = false;
  double p_at_lower = -1.0;
  for (const auto& row : rows) {
    if (row.lower_bound > ub) {
      lower_exceeds = true;
      p_at_lower = row.p_success;
      break;
    }
  }

  const double dt = elapsed_s(t0);
  std::printf("  [2a] upper bound before = %.9f (log2 2.8 within 1e-6): %s\n", ub,
              ub_ok ? "PASS" : "FAIL");
  std::printf("  [2b] LN monotone in -log10(p_success) over x_th in [0, 12]: %s",
              monotone ? "PASS\n" : "FAIL");
  if (!monotone) {
    std::printf(" (dips by up to %.4f ebits below its running maximum from x_th = %.2f; "
                "monotone beyond the dip, and the crossing checks below pass)\n",
                worst_dip, dip_at);
  }
  std::printf("  [2c] Gaussian LN crosses %.4f at p_success = %.3e in (0, 0.5): %s\n",
              kLog2_2_8, p_at_crossing, crossing_ok ? "PASS" : "FAIL");
  std::printf("  [2d] lower bound after distillation exceeds the input upper bound "
              "(first at p_success = %.3e): %s\n",
              p_at_lower, lower_exceeds ? "PASS" : "FAIL");
  const bool pass = ub_ok && monotone && crossing_ok && lower_exceeds && dt < 10.0;
  report(2, pass, "blocked-channel sweep, pure input (" + std::to_string(dt) + " s)");
  CHECK(ub_ok);
  CHECK(monotone);
  CHECK(crossing_ok);
  CHECK(lower_exceeds);
  CHECK(dt < 10.0);
}

TEST_CASE("criterion 3: excess input noise keeps the lower bound beneath the input bound") {
  const auto mix = blocked_channel_mixture(1.0 / 0.1 + 10.0);
  const auto rows = threshold_sweep(mix, 0.7, threshold_grid(0.0, 12.0, 0.25));
  const double ub = rows.front().upper_bound_before;
  double max_lb = -1e30;
  for (const auto& row : rows) max_lb = std::max(max_lb, row.lower_bound);
  const bool pass = max_lb < ub;
  report(3, pass,
         "mixed input: max lower bound " + std::to_string(max_lb) +
             " stays below the input upper bound " + std::to_string(ub));
  CHECK(pass);
}

TEST_CASE("criterion 4: closed forms agree with sampling on a 27-case grid") {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<SourceParams> sources = {
      SourceParams(0.1, 10.0, 0.5),    // pure
      SourceParams(0.1, 20.0, 0.5),    // excess noise
      SourceParams(0.5, 30.0, 0.35),   // asymmetric splitter, strong noise
  };
  const std::vector<LossChannel> channels = {
      LossChannel({{0.0, 0.8}, {1.0, 0.2}}),
      LossChannel({{0.25, 0.5}, {1.0, 0.5}}),
      one_peak_channel(0.8, 0.1),
  };
  const std::vector<double> thresholds = {0.0, 1.0, 2.0};
  constexpr std::uint64_t kSamples = 10000000;

  int comparisons = 0;
  int within = 0;
  std::uint64_t seed = 9000;
  for (const auto& src : sources) {
    for (const auto& ch : channels) {
      const auto mix = mixture_from_channel(src, ch);
      for (double x_th : thresholds) {
        const TapConfig tap(0.7, x_th);
        const auto analytic = distill(mix, tap);
        const auto mc = run_mc(mix, tap, kSamples, seed++);
        for (int i = 0; i < 4; ++i) {
          for (int j = i; j < 4; ++j) {
            const double se = mc.cm.se(i, j);
            const double z =
                se > 0.0 ? std::abs(mc.cm.cm(i, j) - analytic.cm_post(i, j)) / se : 0.0;
            ++comparisons;
            if (z <= 3.0) ++within;
          }
        }
        const double pz =
            std::abs(mc.acceptance.fraction - analytic.p_success) / mc.acceptance.se;
        ++comparisons;
        if (pz <= 3.0) ++within;
      }
    }
  }
  const double frac = static_cast<double>(within) / comparisons;
  const double dt = elapsed_s(t0);
  const bool pass = frac >= 0.95;
  report(4, pass,
         "sampling oracle at n = 1e7: " + std::to_string(within) + "/" +
             std::to_string(comparisons) + " comparisons within 3 SE (" +
             std::to_string(dt) + " s)");
  CHECK(frac >= 0.95);
}

TEST_CASE("criterion 5: the binary experimental channel Gaussifies under tight heralding") {
  const auto t0 = std::chrono::steady_clock::now();
  // reference operating point: -2.6 dB two-mode squeezing, noise variance
  // set so that P_S(x_th = 9) lands near 1.69e-5 at T = 0.93
  const SourceParams src(std::pow(10.0, -0.26), 118.6436, 0.5);
  const auto mix = mixture_from_channel(src, LossChannel({{0.25, 0.5}, {1.0, 0.5}}));
  const double tap_t = 0.93;

  bool weights_monotone = true;
  double prev = 1.0;
  for (double x = 0.0; x <= 9.0; x += 0.5) {
    const double w_lo = distill(mix, TapConfig(tap_t, x)).posterior_weights[0];
    if (w_lo > prev + 1e-12) weights_monotone = false;
    prev = w_lo;
  }

  const double p_ref = distill(mix, TapConfig(tap_t, 9.0)).p_success;

  // bisect the threshold where the success probability reaches 2e-5
  double lo = 5.0, hi = 12.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (distill(mix, TapConfig(tap_t, mid)).p_success > 2e-5) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double x_star = 0.5 * (lo + hi);
  const auto at_star = distill(mix, TapConfig(tap_t, x_star));
  const bool residual_ok = at_star.posterior_weights[0] < 0.02;

  // sampled Gaussification check: excess kurtosis of the conditioned signal
  RecordStream stream(mix, TapConfig(tap_t, x_star), 20000000, 5150);
  const auto kurt = kurtosis_diagnostic(stream, Quadrature::XB, x_star);
  const bool kurtosis_ok = std::abs(kurt.excess) <= 3.0 * kurt.se;

  const double pre_kurt = testutil::mixture_excess_kurtosis(
      {{0.5, tap_t * mix[0].cm.v_bx() + (1 - tap_t)},
       {0.5, tap_t * mix[1].cm.v_bx() + (1 - tap_t)}});

  const double dt = elapsed_s(t0);
  std::printf("  [5a] posterior weight of the 25%% level monotone decreasing: %s\n",
              weights_monotone ? "PASS" : "FAIL");
  std::printf("  [5b] residual weight %.2e < 0.02 at x_th = %.3f where P_S = 2e-5 "
              "(reference point P_S(9.0) = %.3e): %s\n",
              at_star.posterior_weights[0], x_star, p_ref,
              residual_ok ? "PASS" : "FAIL");
  std::printf("  [5c] conditioned x_B excess kurtosis %.3f +- %.3f (pre-selection %.3f) "
              "within 3 SE of 0 at %llu accepted: %s\n",
              kurt.excess, kurt.se, pre_kurt,
              static_cast<unsigned long long>(kurt.n), kurtosis_ok ? "PASS" : "FAIL");
  const bool pass = weights_monotone && residual_ok && kurtosis_ok;
  report(5, pass, "Gaussification of the binary channel (" + std::to_string(dt) + " s)");
  CHECK(weights_monotone);
  CHECK(residual_ok);
  CHECK(kurtosis_ok);
}

TEST_CASE("criterion 6: property suite") {
  std::mt19937 gen(77001);
  std::uniform_real_distribution<double> u(0.0, 1.0);

  bool physical_ok = true;
  bool flip_ok = true;
  bool involution_ok = true;
  for (int i = 0; i < 40; ++i) {
    const auto state = testutil::random_state(gen);
    const auto ch = testutil::random_channel(gen);
    const auto mix = mixture_from_channel(state.source, ch);
    const auto mixed = mixture_cm(mix);
    const auto post = distill(mix, TapConfig(0.6 + 0.4 * u(gen), 2.0 * u(gen))).cm_post;
    physical_ok &= state.cm.is_physical() && mixed.is_physical() && post.is_physical();

    Eigen::Matrix4d f = Eigen::Matrix4d::Identity();
    f(2, 2) = f(3, 3) = -1.0;
    const TwoModeCovariance flipped(f * state.cm.matrix() * f);
    flip_ok &= std::abs(gaussian_log_negativity(flipped) -
                        gaussian_log_negativity(state.cm)) <= 1e-12;
    involution_ok &= ptranspose(ptranspose(state.cm)).matrix() == state.cm.matrix();
  }

  bool marginal_ok = true;
  const auto mix = blocked_channel_mixture(10.0);
  for (auto q : {Quadrature::XB, Quadrature::XJointPlus, Quadrature::PJointMinus}) {
    double max_sigma = 0.0;
    for (const auto& c : mix.components()) {
      max_sigma = std::max(max_sigma, std::sqrt(marginal_variance(c.cm, q)));
    }
    const double lim = 10.0 * max_sigma;
    const double integral = testutil::simpson(
        [&](double x) {
          const std::vector<double> grid = {x};
          return marginal_pdf(mix, q, grid)[0];
        },
        -lim, lim, 4000);
    marginal_ok &= std::abs(integral - 1.0) <= 1e-6;
  }

  const auto r1 = sample_records(mix, TapConfig(0.7, 0.0), 100000, 31);
  const auto r2 = sample_records(mix, TapConfig(0.7, 0.0), 100000, 31);
  bool seed_ok = r1.size() == r2.size();
  for (std::size_t i = 0; seed_ok && i < r1.size(); ++i) {
    seed_ok = r1[i].x_a == r2[i].x_a && r1[i].p_a == r2[i].p_a && r1[i].x_b == r2[i].x_b &&
              r1[i].p_b == r2[i].p_b && r1[i].x_t == r2[i].x_t && r1[i].p_t == r2[i].p_t &&
              r1[i].component == r2[i].component;
  }

  const struct {
    double x, f;
  } table[] = {{1.000001, 1.1187131984582434e-05}, {1.5, 0.90241011860920293},
               {2.0, 1.3774437510817343},          {3.0, 2.0},
               {5.05, 2.7694369420269209},         {10.1, 3.7766143504516577},
               {100.0, 7.0865271850249581},        {1000.0, 10.408479085101805}};
  bool entropy_ok = entropy_f(1.0) == 0.0;
  for (const auto& [x, f] : table) {
    entropy_ok &= std::abs(entropy_f(x) / f - 1.0) <= 1e-12;
  }

  std::printf("  [6] physicality %s, sign-flip invariance %s, involution %s, "
              "marginal normalization %s, seed reproducibility %s, entropy values %s\n",
              physical_ok ? "PASS" : "FAIL", flip_ok ? "PASS" : "FAIL",
              involution_ok ? "PASS" : "FAIL", marginal_ok ? "PASS" : "FAIL",
              seed_ok ? "PASS" : "FAIL", entropy_ok ? "PASS" : "FAIL");
  const bool pass =
      physical_ok && flip_ok && involution_ok && marginal_ok && seed_ok && entropy_ok;
  report(6, pass, "invariant and property checks");
  CHECK(physical_ok);
  CHECK(flip_ok);
  CHECK(involution_ok);
  CHECK(marginal_ok);
  CHECK(seed_ok);
  CHECK(entropy_ok);
}

TEST_CASE("criterion 7: the ingest path is bit-identical to the in-memory path") {
  namespace fs = std::filesystem;
  const auto t0 = std::chrono::steady_clock::now();
  const auto mix = blocked_channel_mixture(10.0);
  const TapConfig tap(0.7, 0.0);
  const std::uint64_t n = 1000000;
  const std::uint64_t seed = 31415;
  const std::vector<double> thresholds = {0.0, 1.0, 2.0};

  const fs::path tmp = fs::temp_directory_path() / "cvdist_acceptance_7";
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  const fs::path file = tmp / "records.txt";
  {
    RecordStream stream(mix, tap, n, seed);
    write_records(file, stream);
  }

  // re-read records equal the generated stream estimate, element for element
  bool direct_ok = true;
  for (double x_th : thresholds) {
    const auto mem = empirical_cm(RecordStream(mix, tap, n, seed), x_th);
    FileRecordReader reader(file);
    const auto disk = empirical_cm(reader, x_th);
    direct_ok &= mem.cm.matrix() == disk.cm.matrix() && mem.se == disk.se && mem.n == disk.n;
  }

  // end-to-end: the ingest artifacts reproduce the in-memory numbers exactly
  IngestOptions opt;
  opt.files = {file};
  opt.weights = {1.0};
  opt.thresholds = thresholds;
  opt.out_dir = tmp / "out";
  opt.seed = 9;
  ingest_and_distill(opt);

  bool end_to_end_ok = true;
  {
    std::ifstream in(opt.out_dir / "sweep.csv");
    std::string line;
    std::getline(in, line);  // header
    for (double x_th : thresholds) {
      REQUIRE(std::getline(in, line));
      std::stringstream ss(line);
      std::string cell;
      std::vector<std::string> cells;
      while (std::getline(ss, cell, ',')) cells.push_back(cell);
      const auto rate = acceptance_rate(RecordStream(mix, tap, n, seed), x_th);
      const auto mem = empirical_cm(RecordStream(mix, tap, n, seed), x_th);
      end_to_end_ok &= parse_double(cells[1]) == rate.fraction;
      end_to_end_ok &= parse_double(cells[2]) == gaussian_log_negativity(mem.cm);
    }
  }
  fs::remove_all(tmp);

  const double dt = elapsed_s(t0);
  const bool pass = direct_ok && end_to_end_ok;
  report(7, pass,
         "1e6-record round trip, re-read and end-to-end ingest bit-identical (" +
             std::to_string(dt) + " s)");
  CHECK(direct_ok);
  CHECK(end_to_end_ok);
}
