#pragma once

#include <stdexcept>
#include <string>

namespace qlif {

/// Invalid model parameters, site indices, configs or requests.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The dense engine was asked for more sites than it is configured to hold.
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical result left its physically admissible range.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Too few usable points for a regression.
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace qlif
