#pragma once

#include <stdexcept>
#include <string>

namespace splitstream {

// Bad shapes, out-of-range options, inconsistent configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Values outside a function's domain (NaN input, log of <= -1, malformed rows).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Connection-fatal framing or session violations.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Transport closed or timed out; the caller may reconnect and resume.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InternalError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace splitstream
