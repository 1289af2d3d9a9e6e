#pragma once

#include <stdexcept>
#include <string>

namespace curio {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration, data file or template.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Caller violated an operation's precondition.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

class BackendError : public Error {
 public:
  using Error::Error;
};

// Retries exhausted on transport failures or rate limits.
class BackendUnavailable : public BackendError {
 public:
  using BackendError::BackendError;
};

class ProtocolError : public BackendError {
 public:
  using BackendError::BackendError;
};

class CassetteMiss : public BackendError {
 public:
  explicit CassetteMiss(std::string hash)
      : BackendError("cassette miss for request " + hash), hash_(std::move(hash)) {}
  const std::string& hash() const noexcept { return hash_; }

 private:
  std::string hash_;
};

// A model reply that could not be mapped onto the expected answer format.
class UnparseableResponse : public Error {
 public:
  UnparseableResponse(const std::string& what, std::string raw)
      : Error(what), raw_(std::move(raw)) {}
  const std::string& raw() const noexcept { return raw_; }

 private:
  std::string raw_;
};

class DegenerateSamples : public Error {
 public:
  using Error::Error;
};

class NoQualifyingSessions : public Error {
 public:
  using Error::Error;
};

}  // namespace curio
