#include "cfse/errors.hpp"

namespace cfse {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NotHermitian: return "NotHermitian";
    case ErrorKind::TraceNotOne: return "TraceNotOne";
    case ErrorKind::SignatureViolation: return "SignatureViolation";
    case ErrorKind::NotUnitary: return "NotUnitary";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NonPeriodicGenerator: return "NonPeriodicGenerator";
    case ErrorKind::InvalidSeed: return "InvalidSeed";
    case ErrorKind::ValidationFailure: return "ValidationFailure";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::NoSliceAtoms: return "NoSliceAtoms";
    case ErrorKind::RootFindStall: return "RootFindStall";
    case ErrorKind::EnsembleEmpty: return "EnsembleEmpty";
    case ErrorKind::NoBracket: return "NoBracket";
    case ErrorKind::OverflowGuard: return "OverflowGuard";
    case ErrorKind::NoAdmissibleStart: return "NoAdmissibleStart";
    case ErrorKind::RegularityGateFailed: return "RegularityGateFailed";
    case ErrorKind::DegenerateKernel: return "DegenerateKernel";
    case ErrorKind::ConstantDirection: return "ConstantDirection";
    case ErrorKind::EmptySlice: return "EmptySlice";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

}  // namespace cfse
