#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace csmri {

struct InvalidArgument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ShapeMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Coarse or fine system that cannot be solved (singular and inconsistent).
struct SingularSystem : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// An iterative solver detected growth it cannot recover from. Carries the
// iterate at the point of detection.
struct DivergenceError : std::runtime_error {
  DivergenceError(const std::string& what, std::vector<double> iterate)
      : std::runtime_error(what), iterate(std::move(iterate)) {}
  std::vector<double> iterate;
};

struct TrainingError : std::runtime_error {
  TrainingError(const std::string& what, int epoch, int sample)
      : std::runtime_error(what), epoch(epoch), sample(sample) {}
  int epoch;
  int sample;
};

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CorruptCheckpoint : CheckpointError {
  using CheckpointError::CheckpointError;
};

}  // namespace csmri
