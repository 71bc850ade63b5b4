#pragma once

#include <stdexcept>
#include <string>

namespace snnood {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed file contents (bad magic, unknown version, bad layout).
struct FormatError : Error {
  using Error::Error;
};

/// Two inputs that must agree do not (e.g. image/label counts).
struct ConsistencyError : Error {
  using Error::Error;
};

/// Underlying read/write failure or truncated stream.
struct IoError : Error {
  using Error::Error;
};

/// A value passed by the caller violates a precondition.
struct ArgumentError : Error {
  using Error::Error;
};

/// Invalid configuration (encoder settings, architecture, experiment file).
struct ConfigError : Error {
  using Error::Error;
};

/// Non-finite values where finite ones are required.
struct NumericError : Error {
  using Error::Error;
};

/// Training diverged or could not proceed.
struct TrainingError : Error {
  using Error::Error;
};

/// Detector fitting failed (e.g. a class with no predicted members).
struct FitError : Error {
  using Error::Error;
};

/// Query against a class the detector was never fitted on.
struct LookupError : Error {
  using Error::Error;
};

/// Stored artifact failed its checksum.
struct CorruptionError : Error {
  using Error::Error;
};

/// Metric undefined for the given input (e.g. single-class score set).
struct MetricError : Error {
  using Error::Error;
};

/// Tensor dimensions incompatible with the requested operation.
struct ShapeError : Error {
  using Error::Error;
};

}  // namespace snnood
