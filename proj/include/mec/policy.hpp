#pragma once

#include <string>

#include "mec/env.hpp"
#include "mec/random.hpp"

namespace mec {

/// Anything that picks an offloading decision for the current slot.
/// `reset` marks an episode boundary.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string label() const = 0;
  virtual void reset() {}
  virtual Action act(const State& s, Rng& rng) = 0;
};

}  // namespace mec
