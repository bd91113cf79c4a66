#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>

#include "cvdist/config.hpp"
#include "cvdist/errors.hpp"

namespace cvdist {

/// 4x4 covariance matrix of a two-mode Gaussian state.
///
/// Quadrature order is (x_A, p_A, x_B, p_B) and entries are second central
/// moments in shot-noise units (vacuum variance = 1). The stored matrix is
/// exactly symmetric. Genuine states are positive definite; construction
/// only rejects matrices that are indefinite beyond tolerance, so that
/// boundary cases (rank-deficient sample estimates, partial transposes of
/// entangled states) remain representable. Physicality of a *state* is the
/// stronger condition `is_physical()`: both symplectic eigenvalues >= 1 - tol.
class TwoModeCovariance {
 public:
  explicit TwoModeCovariance(const Eigen::Matrix4d& m) : m_(0.5 * (m + m.transpose())) {
    const double scale = std::max(1.0, m_.diagonal().cwiseAbs().maxCoeff());
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > kTol * scale) {
      throw NonPhysical("covariance matrix is not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(m_, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -kTol * scale) {
      throw NonPhysical("covariance matrix is not positive semidefinite");
    }
  }

  static TwoModeCovariance vacuum() { return TwoModeCovariance(Eigen::Matrix4d::Identity()); }

  /// Builds the x/p product-form matrix with blocks A = diag(v_ax, v_ap),
  /// B = diag(v_bx, v_bp), C = diag(c_x, c_p); all other entries zero.
  static TwoModeCovariance from_elements(double v_ax, double v_ap, double v_bx,
                                         double v_bp, double c_x, double c_p) {
    Eigen::Matrix4d m = Eigen::Matrix4d::Zero();
    m(0, 0) = v_ax;
    m(1, 1) = v_ap;
    m(2, 2) = v_bx;
    m(3, 3) = v_bp;
    m(0, 2) = m(2, 0) = c_x;
    m(1, 3) = m(3, 1) = c_p;
    return TwoModeCovariance(m);
  }

  const Eigen::Matrix4d& matrix() const { return m_; }
  double operator()(int i, int j) const { return m_(i, j); }

  double v_ax() const { return m_(0, 0); }
  double v_ap() const { return m_(1, 1); }
  double v_bx() const { return m_(2, 2); }
  double v_bp() const { return m_(3, 3); }
  double c_x() const { return m_(0, 2); }
  double c_p() const { return m_(1, 3); }

  /// det of the mode-A block {{m00, m01}, {m10, m11}}.
  double det_a() const { return m_(0, 0) * m_(1, 1) - m_(0, 1) * m_(1, 0); }
  double det_b() const { return m_(2, 2) * m_(3, 3) - m_(2, 3) * m_(3, 2); }
  /// det of the intermodal block {{m02, m03}, {m12, m13}}.
  double det_c() const { return m_(0, 2) * m_(1, 3) - m_(0, 3) * m_(1, 2); }
  double det() const { return m_.determinant(); }

  /// True when the matrix has zero entries everywhere outside the
  /// x-sector (x_A, x_B) and p-sector (p_A, p_B) blocks.
  bool is_xp_product_form(double tol = kTol) const {
    const double scale = std::max(1.0, m_.diagonal().cwiseAbs().maxCoeff());
    return std::abs(m_(0, 1)) <= tol * scale && std::abs(m_(0, 3)) <= tol * scale &&
           std::abs(m_(1, 2)) <= tol * scale && std::abs(m_(2, 3)) <= tol * scale;
  }

  /// Uncertainty-relation test: the state is physical iff both symplectic
  /// eigenvalues are >= 1 - tol, equivalently iff CM + i*Omega >= 0.
  /// The Hermitian form is evaluated here because it stays well conditioned
  /// for nearly pure states, where the gamma-formula discriminant loses
  /// half the working precision to cancellation.
  bool is_physical(double tol = kTol) const {
    Eigen::Matrix4cd h = m_.cast<std::complex<double>>();
    const std::complex<double> i(0.0, 1.0);
    h(0, 1) += i;
    h(1, 0) -= i;
    h(2, 3) += i;
    h(3, 2) -= i;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(h, Eigen::EigenvaluesOnly);
    const double scale = std::max(1.0, m_.diagonal().cwiseAbs().maxCoeff());
    return es.eigenvalues().minCoeff() >= -tol * scale;
  }

 private:
  Eigen::Matrix4d m_;
};

/// Symplectic eigenvalues, mu1 >= mu2 >= 0. Physical states have both >= 1.
struct SymplecticEigenvalues {
  double mu1;
  double mu2;
};

/// Computes the symplectic spectrum from the invariant
/// gamma = det A + det B + 2 det C:
///   mu_{1,2} = sqrt((gamma +- sqrt(gamma^2 - 4 det CM)) / 2).
/// Tiny negative discriminants (degenerate spectra of pure states) are
/// clamped to zero; anything more negative means the matrix is not a
/// covariance matrix and raises NonPhysical.
inline SymplecticEigenvalues symplectic_eigenvalues(const TwoModeCovariance& cm) {
  const double gamma = cm.det_a() + cm.det_b() + 2.0 * cm.det_c();
  const double det = cm.det();
  double disc = gamma * gamma - 4.0 * det;
  const double scale = std::max(1.0, gamma * gamma);
  if (disc < -kTol * scale) {
    throw NonPhysical("invalid covariance matrix: complex symplectic spectrum");
  }
  if (disc < 0.0) disc = 0.0;
  const double root = std::sqrt(disc);
  const double hi = (gamma + root) / 2.0;
  const double lo = (gamma - root) / 2.0;
  if (hi < 0.0 || lo < -kTol * scale) {
    throw NonPhysical("invalid covariance matrix: negative squared symplectic eigenvalue");
  }
  return {std::sqrt(hi), std::sqrt(std::max(lo, 0.0))};
}

/// Partial transpose with respect to mode B (time reversal p_B -> -p_B):
/// negates row and column of p_B off the diagonal. Involutive.
inline TwoModeCovariance ptranspose(const TwoModeCovariance& cm) {
  Eigen::Matrix4d f = Eigen::Matrix4d::Identity();
  f(3, 3) = -1.0;
  return TwoModeCovariance(f * cm.matrix() * f);
}

/// Gaussian logarithmic negativity LN = -log2(nu_min), where nu_min is the
/// smaller symplectic eigenvalue of the partially transposed matrix
/// (delta = det A + det B - 2 det C replaces gamma). Positive iff the
/// Gaussian state is entangled; negative values are reported as-is.
inline double gaussian_log_negativity(const TwoModeCovariance& cm) {
  const auto nu = symplectic_eigenvalues(ptranspose(cm));
  return -std::log2(nu.mu2);
}

/// Thermal-state entropy function
///   f(x) = ((x+1)/2) log2((x+1)/2) - ((x-1)/2) log2((x-1)/2),
/// evaluated in the cancellation-free form
///   f(x) = log2((x+1)/2) + ((x-1)/2) log2((x+1)/(x-1)).
/// f(1) = 0 (the x->1 limit); monotone increasing for x > 1.
inline double entropy_f(double x) {
  if (x < 1.0 - kTol) {
    throw DomainError("entropy_f requires x >= 1");
  }
  if (x <= 1.0) return 0.0;
  const double h = x - 1.0;  // exact near 1
  return (std::log1p(0.5 * h) + 0.5 * h * std::log1p(2.0 / h)) / std::numbers::ln2;
}

/// Conditional-entropy lower bound on distillable entanglement,
///   S(rho_A) - S(rho) = f(sqrt(det A)) - sum_i f(mu_i),
/// with sqrt(det A) the single-mode symplectic eigenvalue of the reduced
/// state. May be negative, in which case the bound is vacuous.
inline double conditional_entropy_lower_bound(const TwoModeCovariance& cm) {
  if (!cm.is_physical()) {
    throw NonPhysical("conditional entropy undefined for unphysical state");
  }
  const auto mu = symplectic_eigenvalues(cm);
  const auto f_clamped = [](double x) { return x <= 1.0 ? 0.0 : entropy_f(x); };
  return entropy_f(std::sqrt(cm.det_a())) - f_clamped(mu.mu1) - f_clamped(mu.mu2);
}

/// Interval bracketing the distillable entanglement of a Gaussian state:
/// conditional-entropy bound from below, log-negativity from above.
struct EntanglementInterval {
  double lower;
  double upper;
};

inline EntanglementInterval entanglement_interval(const TwoModeCovariance& cm) {
  return {conditional_entropy_lower_bound(cm), gaussian_log_negativity(cm)};
}

/// One constituent of a Gaussian mixture.
struct MixtureComponent {
  double weight;
  TwoModeCovariance cm;
};

namespace detail {

inline void validate_weights(std::span<const MixtureComponent> components) {
  if (components.empty()) {
    throw WeightError("mixture has no components");
  }
  double sum = 0.0;
  for (const auto& c : components) {
    if (!(c.weight >= 0.0)) {
      throw WeightError("mixture weights must be nonnegative");
    }
    sum += c.weight;
  }
  if (std::abs(sum - 1.0) > kTol) {
    throw WeightError("mixture weights must sum to one");
  }
}

}  // namespace detail

/// Convexity upper bound on the log-negativity of a mixture:
///   LN(sum_i p_i rho_i) <= log2( sum_i p_i * max(1, 1/nu_min,i) ).
/// The clamp encodes that a PPT component (nu_min >= 1) contributes trace
/// norm 1. This also upper-bounds the distillable entanglement of the
/// mixed state.
inline double upper_bound_ln_mixture(std::span<const MixtureComponent> components) {
  detail::validate_weights(components);
  double sum = 0.0;
  for (const auto& c : components) {
    const auto nu = symplectic_eigenvalues(ptranspose(c.cm));
    sum += c.weight * std::max(1.0, 1.0 / nu.mu2);
  }
  return std::log2(sum);
}

}  // namespace cvdist
