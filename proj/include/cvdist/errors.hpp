#pragma once

#include <stdexcept>
#include <string>

namespace cvdist {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A matrix is not a valid covariance matrix (asymmetric, indefinite, or
/// its symplectic spectrum is not computable).
struct NonPhysical : Error {
  using Error::Error;
};

/// Argument outside the mathematical domain of a function.
struct DomainError : Error {
  using Error::Error;
};

/// Mixture weights are negative or do not sum to one.
struct WeightError : Error {
  using Error::Error;
};

/// Out-of-range physical parameter (variance, transmittance, ...).
struct ParamError : Error {
  using Error::Error;
};

/// Evaluation grid is empty or contains non-finite points.
struct GridError : Error {
  using Error::Error;
};

/// Channel preset name not recognized.
struct UnknownPreset : Error {
  using Error::Error;
};

/// A numerical precondition failed during moment evaluation.
struct NumericalError : Error {
  using Error::Error;
};

/// Post-selection so extreme that the success probability underflows.
struct DegenerateSelection : Error {
  using Error::Error;
};

/// Nearly all perturbed covariance draws were invalid.
struct AllDrawsNonPhysical : Error {
  using Error::Error;
};

/// A covariance matrix could not be factorized for sampling.
struct FactorizationError : Error {
  using Error::Error;
};

/// Too few records passed the heralding threshold for estimation.
struct TooFewAccepted : Error {
  using Error::Error;
};

/// Malformed record file or configuration document.
struct FormatError : Error {
  using Error::Error;
};

/// Record files with incompatible headers (units, columns, version).
struct UnitsMismatch : Error {
  using Error::Error;
};

}  // namespace cvdist
