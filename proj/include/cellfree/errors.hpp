#pragma once

#include <stdexcept>
#include <string>

namespace cellfree {

/// Invalid or mutually inconsistent configuration values.
class InvalidConfig : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Matrix or vector dimensions disagree between inputs.
class ShapeMismatch : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// AP placement rejection sampling exceeded its attempt cap; the
/// minimum-distance constraint is over-constrained for the area.
class PlacementFailure : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// A SINR-constrained design was requested with no active AP.
class EmptyActiveSet : public std::logic_error {
  public:
    using std::logic_error::logic_error;
};

/// Exhaustive enumeration requested beyond the hard AP-count cap.
class CapExceeded : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// The SE targets are unreachable even with every AP switched on.
class GlobalInfeasible : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

} // namespace cellfree
