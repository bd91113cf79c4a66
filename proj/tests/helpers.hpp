#pragma once

// Shared test utilities. Everything here is deliberately independent of the
// library's computation paths: the symplectic oracle goes through a dense
// eigensolver instead of the invariant formulas, integration is plain
// Simpson, and randomness uses std::mt19937 rather than the library RNG.

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "cvdist/channels.hpp"
#include "cvdist/covariance.hpp"

namespace testutil {

/// Symplectic eigenvalues via |imaginary parts| of eig(Omega * CM).
inline cvdist::SymplecticEigenvalues dense_symplectic(const cvdist::TwoModeCovariance& cm) {
  Eigen::Matrix4d omega = Eigen::Matrix4d::Zero();
  omega(0, 1) = 1.0;
  omega(1, 0) = -1.0;
  omega(2, 3) = 1.0;
  omega(3, 2) = -1.0;
  Eigen::EigenSolver<Eigen::Matrix4d> es(omega * cm.matrix());
  std::vector<double> mags;
  for (int i = 0; i < 4; ++i) {
    mags.push_back(std::abs(es.eigenvalues()[i].imag()));
  }
  std::sort(mags.begin(), mags.end());
  return {mags[3], mags[0]};
}

struct RandomState {
  cvdist::SourceParams source;
  double eta;
  cvdist::TwoModeCovariance cm;
};

/// Random physical covariance matrices built from random source parameters
/// and a random constant attenuation.
inline RandomState random_state(std::mt19937& gen) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double v_s = 0.05 + 0.9 * u(gen);
  const double excess = 5.0 * u(gen);
  const double v_a = 1.0 / v_s + excess;
  const double t_s = 0.05 + 0.9 * u(gen);
  const double eta = u(gen);
  cvdist::SourceParams src(v_s, v_a, t_s);
  return {src, eta, cvdist::subchannel_cm(src, eta)};
}

inline cvdist::LossChannel random_channel(std::mt19937& gen) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> nd(1, 6);
  const int n = nd(gen);
  std::vector<cvdist::LossChannel::Level> levels;
  double psum = 0.0;
  for (int i = 0; i < n; ++i) {
    levels.push_back({(i + u(gen)) / n, u(gen) + 0.05});
    psum += levels.back().p;
  }
  for (auto& l : levels) l.p /= psum;
  return cvdist::LossChannel(levels);
}

/// Composite Simpson rule on [a, b].
inline double simpson(const std::function<double(double)>& f, double a, double b, int n) {
  if (n % 2 != 0) ++n;
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) {
    s += f(a + i * h) * (i % 2 == 0 ? 2.0 : 4.0);
  }
  return s * h / 3.0;
}

/// Conditional moments of (x_A, x'_B) given x_t >= x_th for one Gaussian
/// component, by direct quadrature over the tap outcome. Independent of the
/// truncated-normal identities used by the library.
struct QuadratureMoments {
  double p_success;
  double mean_a, mean_b;
  double raw_aa, raw_bb, raw_ab;
};

inline QuadratureMoments conditional_moments_by_quadrature(
    const cvdist::TwoModeCovariance& cm, double tap_t, double x_th) {
  const double t = tap_t;
  const double r = 1.0 - t;
  const double v_d = r * cm.v_bx() + t;
  const double sig = std::sqrt(v_d);
  const double cov_at = std::sqrt(r) * cm.c_x();
  const double cov_bt = std::sqrt(t * r) * (cm.v_bx() - 1.0);
  const double cov_ab = std::sqrt(t) * cm.c_x();
  // conditional on x_t = s: (x_A, x'_B) Gaussian with means proportional to
  // s and a fixed residual covariance
  const double res_aa = cm.v_ax() - cov_at * cov_at / v_d;
  const double res_bb = t * cm.v_bx() + r - cov_bt * cov_bt / v_d;
  const double res_ab = cov_ab - cov_at * cov_bt / v_d;
  const auto dens = [&](double s) {
    return std::exp(-s * s / (2.0 * v_d)) / (sig * std::sqrt(2.0 * std::numbers::pi));
  };
  const double hi = x_th + 12.0 * sig;
  const int n = 40000;
  QuadratureMoments q{};
  q.p_success = simpson(dens, x_th, hi, n);
  const double a1 = simpson([&](double s) { return (cov_at / v_d * s) * dens(s); }, x_th, hi, n);
  const double b1 = simpson([&](double s) { return (cov_bt / v_d * s) * dens(s); }, x_th, hi, n);
  const double aa = simpson(
      [&](double s) {
        const double m = cov_at / v_d * s;
        return (res_aa + m * m) * dens(s);
      },
      x_th, hi, n);
  const double bb = simpson(
      [&](double s) {
        const double m = cov_bt / v_d * s;
        return (res_bb + m * m) * dens(s);
      },
      x_th, hi, n);
  const double ab = simpson(
      [&](double s) {
        return (res_ab + (cov_at / v_d * s) * (cov_bt / v_d * s)) * dens(s);
      },
      x_th, hi, n);
  q.mean_a = a1 / q.p_success;
  q.mean_b = b1 / q.p_success;
  q.raw_aa = aa / q.p_success;
  q.raw_bb = bb / q.p_success;
  q.raw_ab = ab / q.p_success;
  return q;
}

/// Excess kurtosis of a zero-mean scale mixture of normals.
inline double mixture_excess_kurtosis(const std::vector<std::pair<double, double>>& comps) {
  double m2 = 0.0;
  double m4 = 0.0;
  for (const auto& [p, var] : comps) {
    m2 += p * var;
    m4 += 3.0 * p * var * var;
  }
  return m4 / (m2 * m2) - 3.0;
}

}  // namespace testutil
