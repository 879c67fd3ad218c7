#pragma once

#include <stdexcept>
#include <string>

namespace omnisal {

enum class Errc {
  InvalidArgument,
  OutOfRange,
  FovTooSmall,
  AllHoles,
  ShapeMismatch,
  EmptyDataset,
  Diverged,
  CorruptFile,
  ArchitectureMismatch,
  AllZero,
  ConstantInput,
  EmptyFixations,
  TooFewSources,
  IoError,
  BadImage,
};

const char* to_string(Errc code) noexcept;

/// Every recoverable failure in the library is reported as an Error carrying
/// one of the codes above; the CLI maps codes onto process exit codes.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace omnisal
