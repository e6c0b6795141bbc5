#pragma once

#include <stdexcept>
#include <string>

namespace poselift {

/// Caller supplied a malformed argument (bad shape, empty input, out-of-range value).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An internal precondition between two library objects was broken,
/// e.g. a forward cache handed to backward with a different batch.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Geometry that cannot be evaluated, such as a point behind the camera.
class DegenerateGeometry : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training produced non-finite values.
class NumericalFailure : public std::runtime_error {
 public:
  NumericalFailure(const std::string& what, int epoch)
      : std::runtime_error(what), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

}  // namespace poselift
