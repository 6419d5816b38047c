#pragma once

#include <stdexcept>
#include <string>

namespace tfoc {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad filter parameters or an unstable design.
struct DesignError : Error {
  using Error::Error;
};

// Non-finite, empty or otherwise unusable numeric input.
struct InputError : Error {
  using Error::Error;
};

// Signal shorter than the STFT window.
struct LengthError : Error {
  using Error::Error;
};

// Spectrogram shapes that cannot be concatenated.
struct AssemblyError : Error {
  using Error::Error;
};

// Segment or index outside the trial.
struct RangeError : Error {
  using Error::Error;
};

// Tensor or network dimension mismatch.
struct ShapeError : Error {
  using Error::Error;
};

struct SplitError : Error {
  using Error::Error;
};

struct BatchingError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

// Malformed or incompatible checkpoint file.
struct CheckpointError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace tfoc
