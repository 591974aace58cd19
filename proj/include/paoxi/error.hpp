#pragma once

#include <stdexcept>
#include <string>

namespace paoxi {

/// Base of every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or parameters, detected before any work starts.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A lookup outside the tabulated domain (no extrapolation is performed).
class RangeError : public Error {
 public:
  using Error::Error;
};

/// Phantom placement could not satisfy its constraints.
class GenerationError : public Error {
 public:
  using Error::Error;
};

/// On-disk data failed a checksum, header, or size check.
class CorruptionError : public Error {
 public:
  using Error::Error;
};

/// Malformed text input (property files, spectra, manifests, CSV).
class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace paoxi
