#include "ck/error.hpp"

namespace ck {

const char* errc_name(Errc e) {
  switch (e) {
    case Errc::OutsideInjectivityDomain: return "OutsideInjectivityDomain";
    case Errc::TooFarFromGroup: return "TooFarFromGroup";
    case Errc::GroupMismatch: return "GroupMismatch";
    case Errc::DegreeOverflow: return "DegreeOverflow";
    case Errc::DegreeUnderflow: return "DegreeUnderflow";
    case Errc::ChartMismatch: return "ChartMismatch";
    case Errc::BadExponent: return "BadExponent";
    case Errc::EmptySequence: return "EmptySequence";
    case Errc::CoverGap: return "CoverGap";
    case Errc::MarginExhausted: return "MarginExhausted";
    case Errc::CoverMismatch: return "CoverMismatch";
    case Errc::ContractionFailure: return "ContractionFailure";
    case Errc::NonConvergence: return "NonConvergence";
    case Errc::CompatibilityViolation: return "CompatibilityViolation";
    case Errc::StallWithoutCoulomb: return "StallWithoutCoulomb";
    case Errc::SmallnessViolated: return "SmallnessViolated";
    case Errc::NonIntegral: return "NonIntegral";
    case Errc::UnresolvableJump: return "UnresolvableJump";
    case Errc::OscillationTooLarge: return "OscillationTooLarge";
    case Errc::SpecParse: return "SpecParse";
    case Errc::PipelineError: return "PipelineError";
    case Errc::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace ck
