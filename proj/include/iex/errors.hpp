#pragma once

#include <stdexcept>
#include <string>

namespace iex {

// Bad layer/shape wiring, incompatible checkpoints, invalid experiment setup.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// A caller handed a value that violates an operation's preconditions.
struct InputError : std::runtime_error {
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

// API misuse, e.g. stepping a finished episode.
struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed on-disk artifact; message carries the byte offset where parsing failed.
struct FormatError : std::runtime_error {
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite values detected mid-optimization.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace iex
