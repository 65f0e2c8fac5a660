#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace saddlescape {

enum class Errc {
  InvalidArgument,
  NonFinite,
  ShapeMismatch,
  ZeroMatrix,
  NotSquare,
  RankDeficient,
  NegativeMu,
  TooLarge,
  InvalidSpec,
  TooMany,
  NotCritical,
  IsGlobalMin,
  AmbiguousRecovery,
  ZeroProduct,
  Diverged,
  BadDims,
  ConfigError,
  Io,
};

constexpr std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::NonFinite: return "NonFinite";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::ZeroMatrix: return "ZeroMatrix";
    case Errc::NotSquare: return "NotSquare";
    case Errc::RankDeficient: return "RankDeficient";
    case Errc::NegativeMu: return "NegativeMu";
    case Errc::TooLarge: return "TooLarge";
    case Errc::InvalidSpec: return "InvalidSpec";
    case Errc::TooMany: return "TooMany";
    case Errc::NotCritical: return "NotCritical";
    case Errc::IsGlobalMin: return "IsGlobalMin";
    case Errc::AmbiguousRecovery: return "AmbiguousRecovery";
    case Errc::ZeroProduct: return "ZeroProduct";
    case Errc::Diverged: return "Diverged";
    case Errc::BadDims: return "BadDims";
    case Errc::ConfigError: return "ConfigError";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

/// Single exception type for the library; the code identifies the failure.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace saddlescape
