#pragma once

#include <stdexcept>
#include <string>

namespace mdd {

/// A physical-consistency precondition was violated (pi-pulse area,
/// resonance condition, step-accuracy guard).
class PhysicsError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NotImplemented : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace mdd
