#pragma once

#include <stdexcept>
#include <string>

namespace bittide {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid graph structure: self loops, duplicates, unreachable nodes.
class TopologyError : public Error {
 public:
  using Error::Error;
};

/// Pulse schedule inconsistent with the spanning tree.
class ScheduleError : public Error {
 public:
  using Error::Error;
};

/// Spectral computation failed (reducible Laplacian, singular system).
class SpectralError : public Error {
 public:
  using Error::Error;
};

/// Non-finite state or violated step-size constraint during integration.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Bad user-supplied parameters or files.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace bittide
