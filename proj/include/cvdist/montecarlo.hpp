#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <thread>
#include <utility>
#include <vector>

#include "cvdist/channels.hpp"
#include "cvdist/distill.hpp"
#include "cvdist/rng.hpp"

namespace cvdist {

/// One sampled run of the protocol, in shot-noise units. x_b/p_b are the
/// signal-mode quadratures after the tap beam splitter; x_t/p_t the tap
/// mode. `component` records which channel level generated the run.
struct QuadratureRecord {
  double x_a;
  double p_a;
  double x_b;
  double p_b;
  double x_t;
  double p_t;
  std::int32_t component;
};

/// Deterministic stream of protocol samples.
///
/// Each record draws its component from the mixture weights, the four state
/// quadratures through a Cholesky factor of the component matrix, and an
/// independent vacuum mode for the tap splitter. Records are produced in
/// blocks of kRecordBlock with per-block RNG substreams, so the stream is
/// bit-for-bit reproducible for a fixed seed and can be regenerated
/// blockwise on worker threads.
class RecordStream {
 public:
  RecordStream(const GaussianMixture& mix, const TapConfig& tap, std::uint64_t n,
               std::uint64_t seed)
      : n_(n), seed_(seed), rng_(seed, 0) {
    const double t = tap.transmittance;
    sqrt_t_ = std::sqrt(t);
    sqrt_r_ = std::sqrt(1.0 - t);
    cum_weights_.reserve(mix.size());
    factors_.reserve(mix.size());
    double cum = 0.0;
    for (const auto& c : mix.components()) {
      cum += c.weight;
      cum_weights_.push_back(cum);
      factors_.push_back(factorize(c.cm));
    }
    cum_weights_.back() = 1.0;
  }

  std::uint64_t total() const { return n_; }

  bool next(QuadratureRecord& rec) {
    if (index_ >= n_) return false;
    const std::uint64_t block = index_ / kRecordBlock;
    if (block != current_block_) {
      current_block_ = block;
      rng_ = BlockRng(seed_, block);
    }
    rec = generate(rng_, index_);
    ++index_;
    return true;
  }

  /// Generates the i-th record of the stream independently of the cursor;
  /// only meaningful when the caller manages whole blocks itself.
  QuadratureRecord generate(BlockRng& rng, std::uint64_t /*index*/) const {
    const double u = rng.next_unit();
    std::size_t k = 0;
    while (k + 1 < cum_weights_.size() && u >= cum_weights_[k]) ++k;
    double z0, z1, z2, z3, xv, pv;
    rng.normal_pair(z0, z1);
    rng.normal_pair(z2, z3);
    rng.normal_pair(xv, pv);
    const Eigen::Matrix4d& l = factors_[k];
    const double x_a = l(0, 0) * z0;
    const double p_a = l(1, 0) * z0 + l(1, 1) * z1;
    const double x_b = l(2, 0) * z0 + l(2, 1) * z1 + l(2, 2) * z2;
    const double p_b = l(3, 0) * z0 + l(3, 1) * z1 + l(3, 2) * z2 + l(3, 3) * z3;
    QuadratureRecord rec;
    rec.x_a = x_a;
    rec.p_a = p_a;
    rec.x_b = sqrt_t_ * x_b - sqrt_r_ * xv;
    rec.x_t = sqrt_r_ * x_b + sqrt_t_ * xv;
    rec.p_b = sqrt_t_ * p_b - sqrt_r_ * pv;
    rec.p_t = sqrt_r_ * p_b + sqrt_t_ * pv;
    rec.component = static_cast<std::int32_t>(k);
    return rec;
  }

 private:
  static Eigen::Matrix4d factorize(const TwoModeCovariance& cm) {
    Eigen::LLT<Eigen::Matrix4d> llt(cm.matrix());
    if (llt.info() == Eigen::Success) return llt.matrixL();
    // Pure-state matrices (det = 1 exactly) can sit on the PD boundary.
    Eigen::Matrix4d jittered =
        cm.matrix() + kFactorizationJitter * Eigen::Matrix4d::Identity();
    Eigen::LLT<Eigen::Matrix4d> retry(jittered);
    if (retry.info() == Eigen::Success) return retry.matrixL();
    throw FactorizationError("component covariance is not positive definite");
  }

  double sqrt_t_ = 0.0;
  double sqrt_r_ = 0.0;
  std::uint64_t n_;
  std::uint64_t seed_;
  std::uint64_t index_ = 0;
  std::uint64_t current_block_ = 0;
  BlockRng rng_;
  std::vector<double> cum_weights_;
  std::vector<Eigen::Matrix4d> factors_;
};

/// Materializes a short stream (test and I/O sized workloads).
inline std::vector<QuadratureRecord> sample_records(const GaussianMixture& mix,
                                                    const TapConfig& tap, std::uint64_t n,
                                                    std::uint64_t seed) {
  RecordStream stream(mix, tap, n, seed);
  std::vector<QuadratureRecord> out;
  out.reserve(n);
  QuadratureRecord rec;
  while (stream.next(rec)) out.push_back(rec);
  return out;
}

/// Covariance matrix estimated from heralded records.
struct EstimatedCM {
  TwoModeCovariance cm;
  Eigen::Vector4d mean;      ///< conditional first moments of (x_A, p_A, x_B, p_B)
  Eigen::Vector4d mean_se;   ///< standard errors of the means, sd/sqrt(n)
  std::uint64_t n;           ///< accepted-record count
  Eigen::Matrix4d se;        ///< per-element standard errors (symmetric)
  double stat_term;          ///< sqrt(2/(n-1))
};

/// Streaming moment sums over accepted records, mergeable across blocks.
/// Tracks first, second and the fourth-order cross sums needed for
/// delta-method standard errors of every covariance entry.
class MomentAccumulator {
 public:
  void add(const QuadratureRecord& rec) {
    const double z[4] = {rec.x_a, rec.p_a, rec.x_b, rec.p_b};
    ++n_;
    for (int i = 0; i < 4; ++i) {
      s1_[i] += z[i];
      for (int j = 0; j < 4; ++j) {
        s2_[i][j] += z[i] * z[j];
        s21_[i][j] += z[i] * z[i] * z[j];
        s22_[i][j] += z[i] * z[i] * z[j] * z[j];
      }
    }
  }

  void merge(const MomentAccumulator& other) {
    n_ += other.n_;
    for (int i = 0; i < 4; ++i) {
      s1_[i] += other.s1_[i];
      for (int j = 0; j < 4; ++j) {
        s2_[i][j] += other.s2_[i][j];
        s21_[i][j] += other.s21_[i][j];
        s22_[i][j] += other.s22_[i][j];
      }
    }
  }

  std::uint64_t count() const { return n_; }

  EstimatedCM finalize() const {
    if (n_ < 2) {
      throw TooFewAccepted("need at least two accepted records");
    }
    const double n = static_cast<double>(n_);
    double mu[4];
    for (int i = 0; i < 4; ++i) mu[i] = s1_[i] / n;
    Eigen::Matrix4d cov;
    Eigen::Matrix4d se;
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        const double c = (s2_[i][j] - n * mu[i] * mu[j]) / (n - 1.0);
        cov(i, j) = c;
        // Var of the sample covariance: (E[(zi-mui)^2 (zj-muj)^2] - c^2)/n.
        const double m22 = (s22_[i][j] - 2.0 * mu[j] * s21_[i][j] - 2.0 * mu[i] * s21_[j][i] +
                            mu[j] * mu[j] * s2_[i][i] + mu[i] * mu[i] * s2_[j][j] +
                            4.0 * mu[i] * mu[j] * s2_[i][j]) /
                               n -
                           3.0 * mu[i] * mu[i] * mu[j] * mu[j];
        se(i, j) = std::sqrt(std::max(0.0, m22 - c * c) / n);
      }
    }
    Eigen::Vector4d mean;
    Eigen::Vector4d mean_se;
    for (int i = 0; i < 4; ++i) {
      mean[i] = mu[i];
      mean_se[i] = std::sqrt(cov(i, i) / n);
    }
    return {TwoModeCovariance(cov), mean, mean_se, n_, se, std::sqrt(2.0 / (n - 1.0))};
  }

 private:
  std::uint64_t n_ = 0;
  double s1_[4] = {};
  double s2_[4][4] = {};
  double s21_[4][4] = {};  // s21[i][j] = sum zi^2 zj
  double s22_[4][4] = {};  // s22[i][j] = sum zi^2 zj^2
};

/// Scalar moment sums (up to fourth order) of one selected quadrature.
class MarginalAccumulator {
 public:
  explicit MarginalAccumulator(Quadrature q = Quadrature::XB)
      : v_(quadrature_vector(q)) {}

  void add(const QuadratureRecord& rec) {
    const double z = v_[0] * rec.x_a + v_[1] * rec.p_a + v_[2] * rec.x_b + v_[3] * rec.p_b;
    ++n_;
    const double z2 = z * z;
    s1_ += z;
    s2_ += z2;
    s3_ += z2 * z;
    s4_ += z2 * z2;
  }

  void merge(const MarginalAccumulator& other) {
    n_ += other.n_;
    s1_ += other.s1_;
    s2_ += other.s2_;
    s3_ += other.s3_;
    s4_ += other.s4_;
  }

  std::uint64_t count() const { return n_; }

  double central2() const {
    const double n = static_cast<double>(n_);
    const double mu = s1_ / n;
    return s2_ / n - mu * mu;
  }

  double central4() const {
    const double n = static_cast<double>(n_);
    const double mu = s1_ / n;
    return s4_ / n - 4.0 * mu * (s3_ / n) + 6.0 * mu * mu * (s2_ / n) - 3.0 * mu * mu * mu * mu;
  }

 private:
  Eigen::Vector4d v_;
  std::uint64_t n_ = 0;
  double s1_ = 0.0, s2_ = 0.0, s3_ = 0.0, s4_ = 0.0;
};

/// Adapts an in-memory record vector to the streaming-source interface.
struct VectorRecordSource {
  const std::vector<QuadratureRecord>* records;
  std::size_t i = 0;
  bool next(QuadratureRecord& rec) {
    if (i >= records->size()) return false;
    rec = (*records)[i++];
    return true;
  }
};

/// Empirical heralding rate with its binomial standard error.
struct AcceptanceRate {
  double fraction;
  double se;
  std::uint64_t accepted;
  std::uint64_t total;
};

/// Excess kurtosis of a conditioned marginal; the standard error is the
/// Gaussian-null value sqrt(24/n), appropriate for testing Gaussification.
struct KurtosisEstimate {
  double excess;
  double se;
  std::uint64_t n;
};

/// Full set of empirical results from one pass over a record stream.
struct McEstimate {
  EstimatedCM cm;
  AcceptanceRate acceptance;
};

namespace detail {

/// Blockwise reduction over any record source (`bool next(QuadratureRecord&)`).
/// Partial sums are closed per kRecordBlock-sized slice of the *input*
/// stream and merged in slice order, which pins the floating-point
/// reduction tree independently of how the records were produced.
template <class Source, class Accumulator>
std::pair<std::uint64_t, Accumulator> reduce_blocked(Source&& source, double x_th,
                                                     Accumulator seed_acc) {
  Accumulator global = seed_acc;
  Accumulator block = seed_acc;
  std::uint64_t total = 0;
  QuadratureRecord rec;
  while (source.next(rec)) {
    if (rec.x_t >= x_th) block.add(rec);
    ++total;
    if (total % kRecordBlock == 0) {
      global.merge(block);
      block = seed_acc;
    }
  }
  global.merge(block);
  return {total, global};
}

}  // namespace detail

/// Constrains templates to streaming record sources.
template <class Source>
concept RecordSource = requires(Source s, QuadratureRecord r) {
  { s.next(r) } -> std::convertible_to<bool>;
};

/// Estimates the post-selected covariance matrix from a record source,
/// keeping records with x_t >= x_th.
template <RecordSource Source>
EstimatedCM empirical_cm(Source&& source, double x_th) {
  auto [total, acc] =
      detail::reduce_blocked(std::forward<Source>(source), x_th, MomentAccumulator{});
  (void)total;
  return acc.finalize();
}

inline EstimatedCM empirical_cm(const std::vector<QuadratureRecord>& records, double x_th) {
  return empirical_cm(VectorRecordSource{&records}, x_th);
}

template <RecordSource Source>
AcceptanceRate acceptance_rate(Source&& source, double x_th) {
  struct Counter {
    std::uint64_t accepted = 0;
    void add(const QuadratureRecord&) { ++accepted; }
    void merge(const Counter& o) { accepted += o.accepted; }
  };
  auto [total, acc] = detail::reduce_blocked(std::forward<Source>(source), x_th, Counter{});
  if (total == 0) {
    throw TooFewAccepted("no records");
  }
  const double f = static_cast<double>(acc.accepted) / static_cast<double>(total);
  const double se = std::sqrt(f * (1.0 - f) / static_cast<double>(total));
  return {f, se, acc.accepted, total};
}

inline AcceptanceRate acceptance_rate(const std::vector<QuadratureRecord>& records,
                                      double x_th) {
  return acceptance_rate(VectorRecordSource{&records}, x_th);
}

template <RecordSource Source>
KurtosisEstimate kurtosis_diagnostic(Source&& source, Quadrature q, double x_th) {
  auto [total, acc] = detail::reduce_blocked(std::forward<Source>(source), x_th,
                                             MarginalAccumulator{q});
  (void)total;
  if (acc.count() < 100) {
    throw TooFewAccepted("need at least 100 accepted records for kurtosis");
  }
  const double c2 = acc.central2();
  const double c4 = acc.central4();
  const double n = static_cast<double>(acc.count());
  return {c4 / (c2 * c2) - 3.0, std::sqrt(24.0 / n), acc.count()};
}

inline KurtosisEstimate kurtosis_diagnostic(const std::vector<QuadratureRecord>& records,
                                            Quadrature q, double x_th) {
  return kurtosis_diagnostic(VectorRecordSource{&records}, q, x_th);
}

/// Samples n protocol runs and estimates the heralded covariance matrix and
/// acceptance rate. Blocks are distributed over `threads` workers; the
/// per-block substreams and the ordered merge make the result identical to
/// the serial stream for any worker count.
inline McEstimate run_mc(const GaussianMixture& mix, const TapConfig& tap, std::uint64_t n,
                         std::uint64_t seed, unsigned threads = 0) {
  if (threads == 0) {
    threads = std::max(1u, std::thread::hardware_concurrency());
  }
  const std::uint64_t n_blocks = (n + kRecordBlock - 1) / kRecordBlock;
  struct BlockResult {
    MomentAccumulator moments;
    std::uint64_t accepted = 0;
  };
  std::vector<BlockResult> partials(n_blocks);
  RecordStream proto(mix, tap, n, seed);

  auto worker = [&](std::uint64_t first_block, std::uint64_t stride) {
    for (std::uint64_t b = first_block; b < n_blocks; b += stride) {
      BlockRng rng(seed, b);
      const std::uint64_t begin = b * kRecordBlock;
      const std::uint64_t end = std::min(n, begin + kRecordBlock);
      BlockResult& out = partials[b];
      for (std::uint64_t i = begin; i < end; ++i) {
        const QuadratureRecord rec = proto.generate(rng, i);
        if (rec.x_t >= tap.threshold) {
          out.moments.add(rec);
          ++out.accepted;
        }
      }
    }
  };

  if (threads == 1 || n_blocks == 1) {
    worker(0, 1);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back(worker, t, threads);
    }
    for (auto& th : pool) th.join();
  }

  MomentAccumulator global;
  std::uint64_t accepted = 0;
  for (const auto& p : partials) {
    global.merge(p.moments);
    accepted += p.accepted;
  }
  const double f = static_cast<double>(accepted) / static_cast<double>(n);
  const double se = std::sqrt(f * (1.0 - f) / static_cast<double>(n));
  return {global.finalize(), {f, se, accepted, n}};
}

}  // namespace cvdist
