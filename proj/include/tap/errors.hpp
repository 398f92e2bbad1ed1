#pragma once

#include <stdexcept>
#include <string>

namespace tap {

// Shape or extent disagreement between operands.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A documented precondition was violated by the caller.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// A request asks for more classes, instances or permutations than exist.
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input too large for an exhaustive routine.
class SizeError : public std::length_error {
 public:
  using std::length_error::length_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed bytes in a checkpoint or dataset file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training diverged (non-finite loss).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Checkpoint tensors disagree with the configured model.
class CheckpointMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tap
