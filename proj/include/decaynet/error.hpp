#pragma once

#include <stdexcept>
#include <string>

namespace decaynet {

// Each error class maps onto one CLI exit code.
enum class ErrorClass { Usage = 1, Input = 2, MissingStage = 3, Numeric = 4 };

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, const std::string& what) : std::runtime_error(what), cls_(cls) {}
  ErrorClass error_class() const noexcept { return cls_; }
  int exit_code() const noexcept { return static_cast<int>(cls_); }

 private:
  ErrorClass cls_;
};

struct UsageError : Error {
  explicit UsageError(const std::string& w) : Error(ErrorClass::Usage, w) {}
};

struct InputError : Error {
  explicit InputError(const std::string& w) : Error(ErrorClass::Input, w) {}
};

struct MissingStageError : Error {
  explicit MissingStageError(const std::string& w) : Error(ErrorClass::MissingStage, w) {}
};

struct NumericError : Error {
  explicit NumericError(const std::string& w) : Error(ErrorClass::Numeric, w) {}
};

}  // namespace decaynet
