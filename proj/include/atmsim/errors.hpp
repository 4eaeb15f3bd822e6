#pragma once

#include <stdexcept>
#include <string>

namespace atmsim {

/// A field or parameter lies outside its permitted range.
class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// An operation was applied to events or timestamps that go backwards.
class OrderingError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// The operation is not defined for the given object (e.g. EFCI on an OAM cell).
class InvalidOperation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Scenario or contract could not be accepted; carries the violation list.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace atmsim
