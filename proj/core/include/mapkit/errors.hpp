#pragma once

#include <stdexcept>
#include <string>

#include "mapkit/types.hpp"

namespace mapkit {

enum class ErrorCode {
  NegativeRate,
  BadDiagonal,
  RowSumExceedsZero,
  ReducibleGenerator,
  ReducibleChain,
  SubordinatorPhase,
  SingularSolve,
  MaxIterExceeded,
  ResidualTooLarge,
  NullRecurrent,
  SingularPivot,
  SingularAminus1,
  NoValidAlpha,
  NullRecurrentAndSingularA,
  HorizonTooSmall,
  ZOutsideDomain,
  ZeroArgument,
  WrongRegime,
  NotDefective,
  NoValidRoute,
  FluidPhasePresent,
  CapExceeded,
  BadModelFile,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

// Thrown by the iterative solvers; carries the best iterate so callers can
// inspect how far the iteration got.
class SolveError : public Error {
 public:
  SolveError(ErrorCode code, const std::string& message, Matrix best_iterate,
             double residual, long iterations)
      : Error(code, message),
        best_iterate(std::move(best_iterate)),
        residual(residual),
        iterations(iterations) {}

  Matrix best_iterate;
  double residual;
  long iterations;
};

}  // namespace mapkit
