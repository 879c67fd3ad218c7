#include "omnisal/error.hpp"

namespace omnisal {

const char* to_string(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::FovTooSmall: return "FovTooSmall";
    case Errc::AllHoles: return "AllHoles";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::Diverged: return "Diverged";
    case Errc::CorruptFile: return "CorruptFile";
    case Errc::ArchitectureMismatch: return "ArchitectureMismatch";
    case Errc::AllZero: return "AllZero";
    case Errc::ConstantInput: return "ConstantInput";
    case Errc::EmptyFixations: return "EmptyFixations";
    case Errc::TooFewSources: return "TooFewSources";
    case Errc::IoError: return "IoError";
    case Errc::BadImage: return "BadImage";
  }
  return "Unknown";
}

}  // namespace omnisal
