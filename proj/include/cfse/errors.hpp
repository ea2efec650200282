#pragma once

#include <stdexcept>
#include <string>

namespace cfse {

enum class ErrorKind {
  NotHermitian,
  TraceNotOne,
  SignatureViolation,
  NotUnitary,
  DimensionMismatch,
  NonPeriodicGenerator,
  InvalidSeed,
  ValidationFailure,
  InvalidArgument,
  NoSliceAtoms,
  RootFindStall,
  EnsembleEmpty,
  NoBracket,
  OverflowGuard,
  NoAdmissibleStart,
  RegularityGateFailed,
  DegenerateKernel,
  ConstantDirection,
  EmptySlice,
  Io,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what);
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace cfse
