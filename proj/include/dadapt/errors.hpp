#pragma once

#include <stdexcept>
#include <string>

namespace dadapt {

// Error taxonomy shared across the library. The CLI maps these onto its
// exit codes (config=2, data=3, io=4, checkpoint=5).
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct DimensionError : Error {
  using Error::Error;
};

// Violated API contract (non-scalar loss, uncalibrated interval query, ...).
struct ContractError : Error {
  using Error::Error;
};

struct NumericError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct DataError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

struct CheckpointError : Error {
  using Error::Error;
};

struct TrainingError : Error {
  using Error::Error;
};

struct BackboneError : Error {
  using Error::Error;
};

struct StateError : Error {
  using Error::Error;
};

}  // namespace dadapt
