#pragma once

#include <stdexcept>
#include <string>

namespace roa {

/// Raised when a caller breaks a documented precondition (dimension mismatch,
/// non-positive radius, empty point set, ...).
class ContractViolation : public std::invalid_argument {
 public:
  explicit ContractViolation(const std::string& what) : std::invalid_argument(what) {}
};

/// An SOS identity cannot be degree-balanced with the requested multipliers.
class DegreeImbalance : public std::invalid_argument {
 public:
  explicit DegreeImbalance(const std::string& what) : std::invalid_argument(what) {}
};

/// Recomputed identity residual exceeds the certificate tolerance.
class ResidualTooLarge : public std::runtime_error {
 public:
  explicit ResidualTooLarge(const std::string& what) : std::runtime_error(what) {}
};

/// A Gram matrix of a certificate has an eigenvalue below the PSD tolerance.
class GramNotPsd : public std::runtime_error {
 public:
  explicit GramNotPsd(const std::string& what) : std::runtime_error(what) {}
};

/// Bisection found no certified radius at all.
class NoFeasibleRadius : public std::runtime_error {
 public:
  explicit NoFeasibleRadius(const std::string& what) : std::runtime_error(what) {}
};

/// A sampled Lyapunov condition failed on an extracted component.
class SampledConditionViolated : public std::runtime_error {
 public:
  explicit SampledConditionViolated(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed textual input (polynomial strings, JSON system files, SDPA text).
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace roa
