#pragma once

#include <cstddef>
#include <cstdint>

namespace cvdist {

/// Library version, echoed into run manifests and record-file headers.
inline constexpr const char* kVersion = "0.1.0";

/// Central tolerance for physicality tests, discriminant clamps and
/// weight normalization checks. All modules share this one constant.
inline constexpr double kTol = 1e-9;

/// Below this total success probability a heralding threshold is treated
/// as degenerate (selection so extreme that weights underflow).
inline constexpr double kDegenerateProbability = 1e-300;

/// Diagonal jitter permitted when factorizing near-singular covariance
/// matrices of pure states (det CM = 1 is numerically marginal).
inline constexpr double kFactorizationJitter = 1e-12;

/// Records are generated and reduced in fixed-size blocks so that serial
/// and parallel runs produce bit-identical estimates.
inline constexpr std::uint64_t kRecordBlock = 65536;

}  // namespace cvdist
