#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cvdist/covariance.hpp"

namespace cvdist {

/// Parameters of the entangled-state source: two identical squeezed beams
/// with variances v_s (squeezed) and v_a (anti-squeezed) interfering on a
/// beam splitter of transmittivity t_s. v_s * v_a > 1 means a mixed input.
struct SourceParams {
  double v_s;
  double v_a;
  double t_s;

  SourceParams(double v_s_, double v_a_, double t_s_) : v_s(v_s_), v_a(v_a_), t_s(t_s_) {
    if (!(v_s > 0.0) || v_s > 1.0 + kTol) {
      throw ParamError("squeezed variance must lie in (0, 1]");
    }
    if (!(v_a > 0.0) || v_s * v_a < 1.0 - kTol) {
      throw ParamError("anti-squeezed variance must satisfy v_s * v_a >= 1");
    }
    if (t_s < 0.0 || t_s > 1.0) {
      throw ParamError("beam-splitter transmittivity must lie in [0, 1]");
    }
  }
};

/// Discrete distribution of channel transmittances {(eta_i, p_i)}.
/// Levels are kept sorted by strictly increasing eta.
class LossChannel {
 public:
  struct Level {
    double eta;
    double p;
  };

  explicit LossChannel(std::vector<Level> levels) : levels_(std::move(levels)) {
    if (levels_.empty()) {
      throw ParamError("channel needs at least one transmittance level");
    }
    std::sort(levels_.begin(), levels_.end(),
              [](const Level& a, const Level& b) { return a.eta < b.eta; });
    double sum = 0.0;
    for (std::size_t i = 0; i < levels_.size(); ++i) {
      const auto& [eta, p] = levels_[i];
      if (eta < 0.0 || eta > 1.0) {
        throw ParamError("transmittance must lie in [0, 1]");
      }
      if (!(p >= 0.0)) {
        throw WeightError("level probabilities must be nonnegative");
      }
      if (i > 0 && !(eta > levels_[i - 1].eta)) {
        throw ParamError("transmittance levels must be strictly increasing");
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > kTol) {
      throw WeightError("level probabilities must sum to one");
    }
  }

  std::size_t size() const { return levels_.size(); }
  const Level& operator[](std::size_t i) const { return levels_[i]; }
  const std::vector<Level>& levels() const { return levels_; }

  double mean_eta() const {
    double s = 0.0;
    for (const auto& l : levels_) s += l.p * l.eta;
    return s;
  }

  double mean_sqrt_eta() const {
    double s = 0.0;
    for (const auto& l : levels_) s += l.p * std::sqrt(l.eta);
    return s;
  }

 private:
  std::vector<Level> levels_;
};

/// Covariance matrix of the entangled state after one arm passes a constant
/// attenuation eta (loss replaced by vacuum):
///   V_AX = T_S V_S + R_S V_A            V_AP = T_S V_A + R_S V_S
///   V_BX = eta (T_S V_A + R_S V_S) + (1 - eta)
///   V_BP = eta (T_S V_S + R_S V_A) + (1 - eta)
///   |C_X| = |C_P| = sqrt(eta) sqrt(R_S T_S) (V_A - V_S)
/// Signs are fixed as C_X < 0 < C_P so that the squeezed joint quadratures
/// are (x_A + x_B) and (p_A - p_B); log-negativity and the entanglement
/// bounds are invariant under this local sign choice.
inline TwoModeCovariance subchannel_cm(const SourceParams& src, double eta) {
  if (eta < 0.0 || eta > 1.0) {
    throw ParamError("transmittance must lie in [0, 1]");
  }
  const double rs = 1.0 - src.t_s;
  const double v_ax = src.t_s * src.v_s + rs * src.v_a;
  const double v_ap = src.t_s * src.v_a + rs * src.v_s;
  const double v_bx = eta * (src.t_s * src.v_a + rs * src.v_s) + (1.0 - eta);
  const double v_bp = eta * (src.t_s * src.v_s + rs * src.v_a) + (1.0 - eta);
  const double c = std::sqrt(eta) * std::sqrt(rs * src.t_s) * (src.v_a - src.v_s);
  return TwoModeCovariance::from_elements(v_ax, v_ap, v_bx, v_bp, -c, c);
}

/// Zero-mean mixture of two-mode Gaussian components. Every component must
/// be a physical state and the weights must form a distribution.
class GaussianMixture {
 public:
  explicit GaussianMixture(std::vector<MixtureComponent> components)
      : components_(std::move(components)) {
    detail::validate_weights(components_);
    for (const auto& c : components_) {
      if (!c.cm.is_physical()) {
        throw NonPhysical("mixture component is not a physical state");
      }
    }
  }

  std::size_t size() const { return components_.size(); }
  const MixtureComponent& operator[](std::size_t i) const { return components_[i]; }
  std::span<const MixtureComponent> components() const { return components_; }

 private:
  std::vector<MixtureComponent> components_;
};

/// Mixture with one Gaussian component per channel level.
inline GaussianMixture mixture_from_channel(const SourceParams& src, const LossChannel& ch) {
  std::vector<MixtureComponent> comps;
  comps.reserve(ch.size());
  for (const auto& l : ch.levels()) {
    comps.push_back({l.p, subchannel_cm(src, l.eta)});
  }
  return GaussianMixture(std::move(comps));
}

/// Covariance matrix of the mixed state: elementwise convex sum of the
/// component matrices (all components are zero-mean).
inline TwoModeCovariance mixture_cm(const GaussianMixture& mix) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Zero();
  for (const auto& c : mix.components()) {
    m += c.weight * c.cm.matrix();
  }
  return TwoModeCovariance(m);
}

/// Same matrix obtained from the closed form: the sub-channel expressions
/// with eta replaced by <eta> and sqrt(eta) by <sqrt(eta)>. Agrees with
/// mixture_cm elementwise to ~1e-12 (identical arithmetic up to ordering).
inline TwoModeCovariance mixture_cm_via_averages(const SourceParams& src,
                                                 const LossChannel& ch) {
  const double rs = 1.0 - src.t_s;
  const double me = ch.mean_eta();
  const double ms = ch.mean_sqrt_eta();
  const double v_ax = src.t_s * src.v_s + rs * src.v_a;
  const double v_ap = src.t_s * src.v_a + rs * src.v_s;
  const double v_bx = me * (src.t_s * src.v_a + rs * src.v_s) + (1.0 - me);
  const double v_bp = me * (src.t_s * src.v_s + rs * src.v_a) + (1.0 - me);
  const double c = ms * std::sqrt(rs * src.t_s) * (src.v_a - src.v_s);
  return TwoModeCovariance::from_elements(v_ax, v_ap, v_bx, v_bp, -c, c);
}

/// Measurable quadratures: the four single-mode ones plus the two jointly
/// squeezed combinations (x_A + x_B)/sqrt(2) and (p_A - p_B)/sqrt(2).
enum class Quadrature { XA, PA, XB, PB, XJointPlus, PJointMinus };

inline Eigen::Vector4d quadrature_vector(Quadrature q) {
  const double r = 1.0 / std::numbers::sqrt2;
  switch (q) {
    case Quadrature::XA: return {1.0, 0.0, 0.0, 0.0};
    case Quadrature::PA: return {0.0, 1.0, 0.0, 0.0};
    case Quadrature::XB: return {0.0, 0.0, 1.0, 0.0};
    case Quadrature::PB: return {0.0, 0.0, 0.0, 1.0};
    case Quadrature::XJointPlus: return {r, 0.0, r, 0.0};
    case Quadrature::PJointMinus: return {0.0, r, 0.0, -r};
  }
  throw ParamError("unknown quadrature selector");
}

/// Variance of the selected quadrature for one Gaussian component.
inline double marginal_variance(const TwoModeCovariance& cm, Quadrature q) {
  const Eigen::Vector4d v = quadrature_vector(q);
  return v.dot(cm.matrix() * v);
}

/// Probability density of the selected quadrature of the mixed state on a
/// grid: a weighted sum of zero-mean normal densities whose variances are
/// the per-component quadratic forms. Integrates to 1 over the real line.
inline std::vector<double> marginal_pdf(const GaussianMixture& mix, Quadrature q,
                                        std::span<const double> grid) {
  if (grid.empty()) {
    throw GridError("evaluation grid is empty");
  }
  for (double x : grid) {
    if (!std::isfinite(x)) {
      throw GridError("evaluation grid contains non-finite points");
    }
  }
  std::vector<double> variances;
  variances.reserve(mix.size());
  for (const auto& c : mix.components()) {
    variances.push_back(marginal_variance(c.cm, q));
  }
  std::vector<double> out(grid.size(), 0.0);
  const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double d = 0.0;
    for (std::size_t k = 0; k < variances.size(); ++k) {
      const double s2 = variances[k];
      d += mix[k].weight * norm / std::sqrt(s2) * std::exp(-grid[i] * grid[i] / (2.0 * s2));
    }
    out[i] = d;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Channel presets. Multi-level presets place their levels on the grid
// eta_k = 0.1 + k * 0.9/(n-1), k = 0..n-1 (default n = 45), and shape the
// probabilities with a parametric envelope, normalized in floating point.
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<double> level_grid(int n) {
  if (n < 2) {
    throw ParamError("preset channels need at least two levels");
  }
  std::vector<double> etas(static_cast<std::size_t>(n));
  const double step = 0.9 / (n - 1);
  for (int k = 0; k < n; ++k) etas[static_cast<std::size_t>(k)] = 0.1 + k * step;
  return etas;
}

inline LossChannel from_envelope(const std::vector<double>& etas,
                                 std::vector<double> weights) {
  double sum = 0.0;
  for (double w : weights) sum += w;
  if (!(sum > 0.0)) {
    throw ParamError("channel envelope has zero total mass");
  }
  std::vector<LossChannel::Level> levels;
  levels.reserve(etas.size());
  for (std::size_t i = 0; i < etas.size(); ++i) {
    levels.push_back({etas[i], weights[i] / sum});
  }
  return LossChannel(std::move(levels));
}

}  // namespace detail

/// Binary erasure-style channel: transmittance eta_hi with probability p_hi,
/// otherwise eta_lo.
inline LossChannel erasure_channel(double eta_hi, double eta_lo, double p_hi) {
  if (p_hi < 0.0 || p_hi > 1.0) {
    throw ParamError("probability must lie in [0, 1]");
  }
  return LossChannel({{eta_lo, 1.0 - p_hi}, {eta_hi, p_hi}});
}

/// n equally likely levels spanning [0.1, 1].
inline LossChannel uniform_channel(int n = 45) {
  const auto etas = detail::level_grid(n);
  return detail::from_envelope(etas, std::vector<double>(etas.size(), 1.0 / n));
}

/// Gaussian probability envelope centered on `center` with width `width`.
inline LossChannel one_peak_channel(double center, double width, int n = 45) {
  if (!(width > 0.0)) {
    throw ParamError("peak width must be positive");
  }
  const auto etas = detail::level_grid(n);
  std::vector<double> w(etas.size());
  for (std::size_t i = 0; i < etas.size(); ++i) {
    const double d = (etas[i] - center) / width;
    w[i] = std::exp(-0.5 * d * d);
  }
  return detail::from_envelope(etas, std::move(w));
}

/// Two Gaussian envelope peaks; `ratio` scales the mass of the second peak
/// relative to the first.
inline LossChannel two_peak_channel(double c1, double w1, double c2, double w2,
                                    double ratio, int n = 45) {
  if (!(w1 > 0.0) || !(w2 > 0.0) || !(ratio >= 0.0)) {
    throw ParamError("peak widths must be positive and ratio nonnegative");
  }
  const auto etas = detail::level_grid(n);
  std::vector<double> w(etas.size());
  for (std::size_t i = 0; i < etas.size(); ++i) {
    const double d1 = (etas[i] - c1) / w1;
    const double d2 = (etas[i] - c2) / w2;
    w[i] = std::exp(-0.5 * d1 * d1) + ratio * std::exp(-0.5 * d2 * d2);
  }
  return detail::from_envelope(etas, std::move(w));
}

/// Exponential envelope p(eta) ~ exp(-rate * (1 - eta)): full transmission
/// most likely, with a tail toward strong attenuation.
inline LossChannel exp_decay_channel(double rate, int n = 45) {
  if (!(rate > 0.0)) {
    throw ParamError("decay rate must be positive");
  }
  const auto etas = detail::level_grid(n);
  std::vector<double> w(etas.size());
  for (std::size_t i = 0; i < etas.size(); ++i) {
    w[i] = std::exp(-rate * (1.0 - etas[i]));
  }
  return detail::from_envelope(etas, std::move(w));
}

/// Name-based preset dispatch (used by the CLI configuration):
///   erasure(eta_hi, eta_lo, p_hi)
///   uniform45()
///   one_peak(center, width)
///   two_peak(c1, w1, c2, w2, ratio)
///   exp_decay(rate)
inline LossChannel channel_preset(std::string_view name, std::span<const double> params,
                                  int n_levels = 45) {
  const auto need = [&](std::size_t n) {
    if (params.size() != n) {
      throw ParamError("preset '" + std::string(name) + "' expects " +
                       std::to_string(n) + " parameter(s)");
    }
  };
  if (name == "erasure") {
    need(3);
    return erasure_channel(params[0], params[1], params[2]);
  }
  if (name == "uniform45" || name == "uniform") {
    need(0);
    return uniform_channel(n_levels);
  }
  if (name == "one_peak") {
    need(2);
    return one_peak_channel(params[0], params[1], n_levels);
  }
  if (name == "two_peak") {
    need(5);
    return two_peak_channel(params[0], params[1], params[2], params[3], params[4], n_levels);
  }
  if (name == "exp_decay") {
    need(1);
    return exp_decay_channel(params[0], n_levels);
  }
  throw UnknownPreset("unknown channel preset '" + std::string(name) + "'");
}

}  // namespace cvdist
