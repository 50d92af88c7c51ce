#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace copresence {

enum class Errc {
  InvalidSample,
  InvalidArgument,
  RateMismatch,
  EmptyTrace,
  KindMismatch,
  EmptyDataset,
  SchemaMismatch,
  TooFewSamples,
  LengthMismatch,
  UnknownModality,
  InfeasibleAttack,
  MacInvalid,
  Timeout,
  IoError,
  ParseError,
  InvalidPlan,
};

std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace copresence
