#pragma once

#include <stdexcept>
#include <string>

namespace ck {

enum class Errc {
  OutsideInjectivityDomain,
  TooFarFromGroup,
  GroupMismatch,
  DegreeOverflow,
  DegreeUnderflow,
  ChartMismatch,
  BadExponent,
  EmptySequence,
  CoverGap,
  MarginExhausted,
  CoverMismatch,
  ContractionFailure,
  NonConvergence,
  CompatibilityViolation,
  StallWithoutCoulomb,
  SmallnessViolated,
  NonIntegral,
  UnresolvableJump,
  OscillationTooLarge,
  SpecParse,
  PipelineError,
  InvalidArgument,
};

const char* errc_name(Errc e);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

}  // namespace ck
