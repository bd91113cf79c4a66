#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "cvdist/channels.hpp"
#include "cvdist/covariance.hpp"
#include "cvdist/rng.hpp"

namespace cvdist {

/// Tap beam splitter and heralding threshold. The signal keeps the fraction
/// `transmittance` (T); the measured tap carries R = 1 - T. A run is kept
/// when the tap outcome satisfies x_t >= threshold.
struct TapConfig {
  double transmittance;
  double threshold;

  TapConfig(double t, double x_th) : transmittance(t), threshold(x_th) {
    if (!(t > 0.0) || t > 1.0) {
      throw ParamError("tap transmittivity must lie in (0, 1]");
    }
    if (!std::isfinite(x_th)) {
      throw ParamError("herald threshold must be finite");
    }
  }
};

/// Variance of the detected tap mode: V'_D = (1-T) V_BX + T.
inline double detected_variance(double v_bx, double t) {
  return (1.0 - t) * v_bx + t;
}

/// Probability that the tap outcome exceeds the threshold,
/// P_S = (1/2) erfc( x_th / sqrt(2 V'_D) ).
inline double success_probability(double v_dx, double x_th) {
  if (!(v_dx > 0.0)) {
    throw NumericalError("detected variance must be positive");
  }
  return 0.5 * std::erfc(x_th / std::sqrt(2.0 * v_dx));
}

/// Inverse Mills ratio lambda(a) = phi(a) / Q(a) of the standard normal.
/// Direct evaluation below a = 8; Laplace continued fraction for the far
/// tail, where erfc alone would lose the ratio to underflow.
inline double inverse_mills(double alpha) {
  constexpr double kSqrt2Pi = 2.506628274631000502;
  if (alpha < 8.0) {
    const double q = 0.5 * std::erfc(alpha / std::numbers::sqrt2);
    const double phi = std::exp(-0.5 * alpha * alpha) / kSqrt2Pi;
    return phi / q;
  }
  // Mills ratio m(a) = 1/(a + 1/(a + 2/(a + 3/(...)))), evaluated bottom-up.
  double cf = 0.0;
  for (int k = 40; k >= 1; --k) {
    cf = static_cast<double>(k) / (alpha + cf);
  }
  return alpha + cf;
}

/// Heralded moments of (x_A, x'_B) for one Gaussian component, conditioned
/// on x_t >= x_th.
///
/// The joint distribution of (x_A, x'_B, x_t) after the tap is Gaussian with
///   Var(x_t)        = V'_D = R V_BX + T
///   Cov(x_A,  x_t)  = sqrt(R) C_X
///   Cov(x'_B, x_t)  = sqrt(TR) (V_BX - 1)
///   Cov(x_A, x'_B)  = sqrt(T) C_X,
/// so the one-sided conditioning reduces to standard truncated-normal
/// identities: with a = x_th / sqrt(V'_D) and lambda = inverse Mills ratio,
/// every mean shifts by cov/sigma_t * lambda and every second moment drops
/// by cov_i cov_j / V'_D * lambda (lambda - a).
struct ConditionalMomentsX {
  double p_success;  ///< P_{S,i} for this component
  double mean_a;     ///< E[x_A | kept]
  double mean_b;     ///< E[x'_B | kept]
  double var_a;      ///< Var[x_A | kept]
  double var_b;      ///< Var[x'_B | kept]
  double cov_ab;     ///< Cov[x_A, x'_B | kept]

  double raw_aa() const { return var_a + mean_a * mean_a; }
  double raw_bb() const { return var_b + mean_b * mean_b; }
  double raw_ab() const { return cov_ab + mean_a * mean_b; }
};

inline ConditionalMomentsX conditional_moments_x(const TwoModeCovariance& cm,
                                                 const TapConfig& tap) {
  const double t = tap.transmittance;
  const double r = 1.0 - t;
  const double v_d = detected_variance(cm.v_bx(), t);
  if (!(v_d > 0.0)) {
    throw NumericalError("detected variance must be positive");
  }
  const double sig_t = std::sqrt(v_d);
  const double cov_at = std::sqrt(r) * cm.c_x();
  const double cov_bt = std::sqrt(t * r) * (cm.v_bx() - 1.0);
  const double cov_ab = std::sqrt(t) * cm.c_x();
  const double alpha = tap.threshold / sig_t;
  const double q = 0.5 * std::erfc(alpha / std::numbers::sqrt2);
  const double lambda = inverse_mills(alpha);
  const double shrink = lambda * (lambda - alpha);  // in (0, 1)
  ConditionalMomentsX m;
  m.p_success = q;
  m.mean_a = cov_at / sig_t * lambda;
  m.mean_b = cov_bt / sig_t * lambda;
  m.var_a = cm.v_ax() - cov_at * cov_at / v_d * shrink;
  m.var_b = t * cm.v_bx() + r - cov_bt * cov_bt / v_d * shrink;
  m.cov_ab = cov_ab - cov_at * cov_bt / v_d * shrink;
  return m;
}

/// The same five X moments evaluated from pre-integrated Gaussian tail
/// formulas, unnormalized (each carries a factor P_{S,i}).
///
/// Retained for cross-checking only: the first three agree with
/// conditional_moments_x to machine precision, but m2_bb carries an extra
/// R^2 in its Gaussian term and m2_ab an extra R there plus a spurious V'_D
/// on its erfc term, so those two disagree with the truncated-normal route
/// and with Monte-Carlo sampling. The distiller tests quantify both.
struct TailFormMomentsX {
  double m1_a;
  double m1_b;
  double m2_aa;
  double m2_bb;
  double m2_ab;
};

inline TailFormMomentsX conditional_moments_x_tail_forms(const TwoModeCovariance& cm,
                                                         const TapConfig& tap) {
  const double t = tap.transmittance;
  const double r = 1.0 - t;
  const double x_th = tap.threshold;
  const double v_d = detected_variance(cm.v_bx(), t);
  const double c_x = cm.c_x();
  const double v_bx = cm.v_bx();
  const double g = std::exp(-x_th * x_th / (2.0 * v_d));
  const double erfc_term = std::erfc(x_th / std::sqrt(2.0 * v_d));
  const double root = std::sqrt(2.0 * std::numbers::pi * v_d);
  const double root3 = std::sqrt(2.0 * std::numbers::pi * v_d * v_d * v_d);
  TailFormMomentsX m;
  m.m1_a = c_x * std::sqrt(r) / root * g;
  m.m1_b = std::sqrt(t * r) * (v_bx - 1.0) / root * g;
  m.m2_aa = r * c_x * c_x * x_th / root3 * g + cm.v_ax() / 2.0 * erfc_term;
  m.m2_bb = r * t * (v_d - 1.0) * (v_d - 1.0) * x_th / root3 * g +
            (r * t * (v_bx - 1.0) * (v_bx - 1.0) + v_bx) / (2.0 * v_d) * erfc_term;
  m.m2_ab = std::sqrt(t) * r * (v_d - 1.0) * c_x * x_th / root3 * g +
            std::sqrt(t) * c_x * v_d / 2.0 * erfc_term;
  return m;
}

/// P-sector contributions of one component, weighted by its success
/// probability. Conditioning on an X measurement leaves the P marginal of a
/// product-form Gaussian untouched, so the kept-state P moments are just the
/// tapped values V_AP, T V_BP + R and sqrt(T) C_P.
struct ConditionalMomentsP {
  double weighted_aa;  ///< P_{S,i} * V_AP
  double weighted_bb;  ///< P_{S,i} * (T V_BP + R)
  double weighted_ab;  ///< P_{S,i} * sqrt(T) C_P
};

inline ConditionalMomentsP conditional_moments_p(const TwoModeCovariance& cm,
                                                 const TapConfig& tap,
                                                 double p_success_i) {
  const double t = tap.transmittance;
  return {p_success_i * cm.v_ap(),
          p_success_i * (t * cm.v_bp() + (1.0 - t)),
          p_success_i * std::sqrt(t) * cm.c_p()};
}

/// Output of one heralding pass over a mixture.
struct DistillationResult {
  TwoModeCovariance cm_post;                          ///< central moments of the kept state
  double p_success;                                   ///< total success probability
  std::vector<double> posterior_weights;              ///< w_i = p_i P_{S,i} / P_S
  double ln_gaussian;                                 ///< Gaussian LN of cm_post
  std::vector<std::array<double, 2>> component_means; ///< per-component (E[x_A], E[x'_B])
};

/// Runs the heralded single-copy protocol on a mixture: taps mode B, keeps
/// runs with x_t >= threshold, and aggregates the component moments into the
/// covariance matrix of the kept state. Covariances subtract the aggregated
/// first moments, so cm_post is a true central-moment matrix.
inline DistillationResult distill(const GaussianMixture& mix, const TapConfig& tap) {
  for (const auto& c : mix.components()) {
    if (!c.cm.is_xp_product_form()) {
      throw ParamError("distill requires x/p product-form components");
    }
  }

  double p_s = 0.0;
  double m1_a = 0.0, m1_b = 0.0;
  double raw_aa = 0.0, raw_bb = 0.0, raw_ab = 0.0;
  double p_aa = 0.0, p_bb = 0.0, p_ab = 0.0;
  std::vector<double> kept;
  std::vector<std::array<double, 2>> means;
  kept.reserve(mix.size());
  means.reserve(mix.size());

  for (const auto& c : mix.components()) {
    const auto mx = conditional_moments_x(c.cm, tap);
    const auto mp = conditional_moments_p(c.cm, tap, mx.p_success);
    const double pk = c.weight * mx.p_success;
    p_s += pk;
    m1_a += pk * mx.mean_a;
    m1_b += pk * mx.mean_b;
    raw_aa += pk * mx.raw_aa();
    raw_bb += pk * mx.raw_bb();
    raw_ab += pk * mx.raw_ab();
    p_aa += c.weight * mp.weighted_aa;
    p_bb += c.weight * mp.weighted_bb;
    p_ab += c.weight * mp.weighted_ab;
    kept.push_back(pk);
    means.push_back({mx.mean_a, mx.mean_b});
  }

  if (!(p_s >= kDegenerateProbability)) {
    throw DegenerateSelection("success probability underflowed; threshold too extreme");
  }

  const double mean_a = m1_a / p_s;
  const double mean_b = m1_b / p_s;
  DistillationResult res{
      TwoModeCovariance::from_elements(raw_aa / p_s - mean_a * mean_a, p_aa / p_s,
                                       raw_bb / p_s - mean_b * mean_b, p_bb / p_s,
                                       raw_ab / p_s - mean_a * mean_b, p_ab / p_s),
      p_s,
      {},
      0.0,
      std::move(means)};
  res.posterior_weights.reserve(kept.size());
  for (double pk : kept) res.posterior_weights.push_back(pk / p_s);
  res.ln_gaussian = gaussian_log_negativity(res.cm_post);
  return res;
}

/// One row of a threshold sweep.
struct SweepPoint {
  double x_th;
  double p_success;
  double ln_gaussian;
  double lower_bound;          ///< conditional-entropy bound of cm_post
  double upper_bound_before;   ///< mixture LN bound of the input state (constant)
  std::vector<double> posterior_weights;
  TwoModeCovariance cm_post;
};

/// Evaluates the protocol across a grid of herald thresholds. The
/// pre-distillation upper bound is computed once from the input mixture and
/// repeated on every row for plotting convenience.
inline std::vector<SweepPoint> threshold_sweep(const GaussianMixture& mix, double tap_t,
                                               std::span<const double> thresholds) {
  if (thresholds.empty()) {
    throw ParamError("threshold list is empty");
  }
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (!std::isfinite(thresholds[i])) {
      throw ParamError("thresholds must be finite");
    }
    if (i > 0 && !(thresholds[i] > thresholds[i - 1])) {
      throw ParamError("thresholds must be strictly ascending");
    }
  }
  const double ub_before = upper_bound_ln_mixture(mix.components());
  std::vector<SweepPoint> rows;
  rows.reserve(thresholds.size());
  for (double x_th : thresholds) {
    auto res = distill(mix, TapConfig(tap_t, x_th));
    rows.push_back({x_th, res.p_success, res.ln_gaussian,
                    conditional_entropy_lower_bound(res.cm_post), ub_before,
                    std::move(res.posterior_weights), res.cm_post});
  }
  return rows;
}

/// Measurement-error model for a log-negativity estimate.
struct LnErrorEstimate {
  double ln_mean;    ///< mean LN over accepted perturbation draws
  double ln_std;     ///< total error: sqrt(mc_sd^2 + stat_term^2)
  double mc_sd;      ///< spread induced by per-element measurement noise
  double stat_term;  ///< finite-statistics term sqrt(2/(n_post - 1))
  int discarded;     ///< draws whose perturbed matrix had no valid LN
  int trials;
};

/// Propagates per-element measurement noise through the log-negativity:
/// perturbs each of the ten independent covariance elements with zero-mean
/// Gaussian noise of sd `element_sigma`, recomputes LN per draw, and
/// discards draws whose matrix stops being a covariance matrix (complex
/// symplectic spectrum or indefinite). The finite-statistics term
/// sqrt(2/(n_post - 1)) is combined in quadrature.
inline LnErrorEstimate ln_error_monte_carlo(const TwoModeCovariance& cm,
                                            double element_sigma, std::uint64_t n_post,
                                            int trials, std::uint64_t seed = 0x5eed) {
  if (trials < 100) {
    throw ParamError("need at least 100 trials");
  }
  if (n_post < 2) {
    throw ParamError("n_post must be at least 2");
  }
  if (!(element_sigma >= 0.0)) {
    throw ParamError("element noise must be nonnegative");
  }
  double sum = 0.0, sum2 = 0.0;
  int accepted = 0;
  for (int trial = 0; trial < trials; ++trial) {
    BlockRng rng(seed, static_cast<std::uint64_t>(trial));
    Eigen::Matrix4d m = cm.matrix();
    for (int i = 0; i < 4; ++i) {
      for (int j = i; j < 4; ++j) {
        const double noise = element_sigma * rng.normal();
        m(i, j) += noise;
        if (i != j) m(j, i) += noise;
      }
    }
    try {
      const double ln = gaussian_log_negativity(TwoModeCovariance(m));
      sum += ln;
      sum2 += ln * ln;
      ++accepted;
    } catch (const NonPhysical&) {
      // perturbation left the covariance cone; skip the draw
    }
  }
  if (accepted < trials / 100 + 1) {
    throw AllDrawsNonPhysical("more than 99% of perturbed draws were invalid");
  }
  const double mean = sum / accepted;
  double var = 0.0;
  if (accepted > 1) {
    var = std::max(0.0, (sum2 - sum * sum / accepted) / (accepted - 1));
  }
  const double stat = std::sqrt(2.0 / (static_cast<double>(n_post) - 1.0));
  LnErrorEstimate est;
  est.ln_mean = mean;
  est.mc_sd = std::sqrt(var);
  est.stat_term = stat;
  est.ln_std = std::sqrt(var + stat * stat);
  est.discarded = trials - accepted;
  est.trials = trials;
  return est;
}

}  // namespace cvdist
