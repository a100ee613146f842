#pragma once

#include <stdexcept>
#include <string>

namespace condest {

/// Root-finding or quadrature failed to meet its tolerance.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A conditional estimator was requested for a decision it is not defined for.
class ScopeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Too many per-replication failures in a Monte Carlo scenario.
class SimulationQualityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace condest
