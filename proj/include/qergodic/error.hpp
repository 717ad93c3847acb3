#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qergodic {

enum class Errc {
  NegativeEntry,
  RowSumExceedsOne,
  NotADistribution,
  NotTransient,
  ShapeMismatch,
  SurvivalUnderflow,
  NoSurvivors,
  NoConvergence,
  ToleranceTooLoose,
  NonTransitiveTies,
  PathExplosion,
  EmptyFamily,
  BlockNotOnPath,
  Overflow,
  NotIrreducible,
  AssumptionViolation,
  NotScalarChain,
  NotSinglePath,
  ParseError,
  InvalidArgument,
};

constexpr std::string_view to_string(Errc e) {
  switch (e) {
    case Errc::NegativeEntry: return "NegativeEntry";
    case Errc::RowSumExceedsOne: return "RowSumExceedsOne";
    case Errc::NotADistribution: return "NotADistribution";
    case Errc::NotTransient: return "NotTransient";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::SurvivalUnderflow: return "SurvivalUnderflow";
    case Errc::NoSurvivors: return "NoSurvivors";
    case Errc::NoConvergence: return "NoConvergence";
    case Errc::ToleranceTooLoose: return "ToleranceTooLoose";
    case Errc::NonTransitiveTies: return "NonTransitiveTies";
    case Errc::PathExplosion: return "PathExplosion";
    case Errc::EmptyFamily: return "EmptyFamily";
    case Errc::BlockNotOnPath: return "BlockNotOnPath";
    case Errc::Overflow: return "Overflow";
    case Errc::NotIrreducible: return "NotIrreducible";
    case Errc::AssumptionViolation: return "AssumptionViolation";
    case Errc::NotScalarChain: return "NotScalarChain";
    case Errc::NotSinglePath: return "NotSinglePath";
    case Errc::ParseError: return "ParseError";
    case Errc::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace qergodic
