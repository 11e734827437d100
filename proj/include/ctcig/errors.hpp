#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace ctcig {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A configuration value is out of range or missing. `field()` names it.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error("configuration error [" + field + "]: " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& what) : Error("dimension error: " + what) {}
};

class NumericalDomainError : public Error {
 public:
  explicit NumericalDomainError(const std::string& what) : Error("numerical domain error: " + what) {}
};

class SamplerConfigError : public Error {
 public:
  explicit SamplerConfigError(const std::string& what) : Error("sampler config error: " + what) {}
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error("validation error: " + what) {}
};

/// Broken internal invariant (e.g. FIRM imaginary residue above bound).
class InternalConsistencyError : public Error {
 public:
  explicit InternalConsistencyError(const std::string& what)
      : Error("internal consistency error: " + what) {}
};

/// Transport failure talking to a chat/embedding endpoint after all retries.
class EndpointError : public Error {
 public:
  EndpointError(int turn, const std::string& what)
      : Error("endpoint error at turn " + std::to_string(turn) + ": " + what), turn_(turn) {}
  int turn() const noexcept { return turn_; }

 private:
  int turn_;
};

class ProtocolError : public Error {
 public:
  explicit ProtocolError(const std::string& what) : Error("protocol error: " + what) {}
};

class LexiconViolationError : public Error {
 public:
  explicit LexiconViolationError(std::vector<std::string> words)
      : Error("lexicon violation: " + join(words)), words_(std::move(words)) {}
  const std::vector<std::string>& words() const noexcept { return words_; }

 private:
  static std::string join(const std::vector<std::string>& w) {
    std::string out;
    for (const auto& s : w) out += (out.empty() ? "" : ", ") + s;
    return out;
  }
  std::vector<std::string> words_;
};

class IngestionError : public Error {
 public:
  explicit IngestionError(const std::string& what) : Error("ingestion error: " + what) {}
};

class LoadError : public Error {
 public:
  explicit LoadError(const std::string& what) : Error("load error: " + what) {}
};

/// Training produced a non-finite loss.
class TrainingError : public Error {
 public:
  explicit TrainingError(const std::string& what) : Error("training error: " + what) {}
};

}  // namespace ctcig
