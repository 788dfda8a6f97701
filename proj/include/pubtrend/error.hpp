#pragma once

#include <stdexcept>
#include <string>

namespace pubtrend {

// Input that violates a documented contract (bad rows, unknown entities,
// malformed plans). Maps to CLI exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A numerical stage could not produce a result. Maps to CLI exit code 2.
class ComputationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Not enough usable observations for the requested estimate.
class InsufficientDataError : public ComputationError {
 public:
  using ComputationError::ComputationError;
};

class RankDeficientError : public ComputationError {
 public:
  using ComputationError::ComputationError;
};

// The follower series never meets the leader series in the overlap.
class NoCrossingError : public ComputationError {
 public:
  using ComputationError::ComputationError;
};

// Filesystem or network failure. Maps to CLI exit code 3.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pubtrend
