#pragma once

#include <stdexcept>
#include <string>

namespace snnadv {

/// Shapes of operands do not line up.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A class label or other index falls outside its valid range.
class IndexError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// NaN or Inf showed up where only finite values are allowed.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid hyperparameter or configuration value.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed file contents (IDX, checkpoint, config).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Forward traces and backward request do not belong together.
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Operation not supported for this model (e.g. converting a non-ReLU net).
class UnsupportedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training diverged.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, int epoch)
      : std::runtime_error(what), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

/// Not enough qualifying samples to build an evaluation set.
class SelectionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace snnadv
