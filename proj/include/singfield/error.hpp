#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace singfield {

enum class Errc {
  SyntaxError,
  UnknownIdentifier,
  ArityMismatch,
  DomainError,
  ShapeMismatch,
  DivisionBySingularSeries,
  InvalidArgument,
  OnSingularSurface,
  DegenerateGradient,
  InsufficientDecay,
  NoConvergence,
  SingularPointTolExceeded,
  NoMatchingIndex,
  ResonanceObstruction,
  UnsupportedResonance,
  NotResonant,
  NonDiagonalLinearPart,
  HyperbolicityViolated,
  SpectrumMismatch,
  TangentIsotropicDirection,
  DegenerateLeadingCoefficient,
  NotParabolic,
  PositivityViolated,
  VanishingFrameFactor,
  NotASingularPoint,
  EigenplaneUndefined,
  PChartOverflow,
  ConfigError,
};

constexpr std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::SyntaxError: return "SyntaxError";
    case Errc::UnknownIdentifier: return "UnknownIdentifier";
    case Errc::ArityMismatch: return "ArityMismatch";
    case Errc::DomainError: return "DomainError";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::DivisionBySingularSeries: return "DivisionBySingularSeries";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::OnSingularSurface: return "OnSingularSurface";
    case Errc::DegenerateGradient: return "DegenerateGradient";
    case Errc::InsufficientDecay: return "InsufficientDecay";
    case Errc::NoConvergence: return "NoConvergence";
    case Errc::SingularPointTolExceeded: return "SingularPointTolExceeded";
    case Errc::NoMatchingIndex: return "NoMatchingIndex";
    case Errc::ResonanceObstruction: return "ResonanceObstruction";
    case Errc::UnsupportedResonance: return "UnsupportedResonance";
    case Errc::NotResonant: return "NotResonant";
    case Errc::NonDiagonalLinearPart: return "NonDiagonalLinearPart";
    case Errc::HyperbolicityViolated: return "HyperbolicityViolated";
    case Errc::SpectrumMismatch: return "SpectrumMismatch";
    case Errc::TangentIsotropicDirection: return "TangentIsotropicDirection";
    case Errc::DegenerateLeadingCoefficient: return "DegenerateLeadingCoefficient";
    case Errc::NotParabolic: return "NotParabolic";
    case Errc::PositivityViolated: return "PositivityViolated";
    case Errc::VanishingFrameFactor: return "VanishingFrameFactor";
    case Errc::NotASingularPoint: return "NotASingularPoint";
    case Errc::EigenplaneUndefined: return "EigenplaneUndefined";
    case Errc::PChartOverflow: return "PChartOverflow";
    case Errc::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

/// Single exception type for the library; `code()` carries the failure class.
/// Parser errors additionally carry the byte offset into the source text.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message, std::optional<std::size_t> offset = std::nullopt)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        detail_(message),
        offset_(offset) {}

  Errc code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }
  std::optional<std::size_t> offset() const noexcept { return offset_; }

 private:
  Errc code_;
  std::string detail_;
  std::optional<std::size_t> offset_;
};

[[noreturn]] inline void fail(Errc code, const std::string& message) { throw Error(code, message); }

}  // namespace singfield
