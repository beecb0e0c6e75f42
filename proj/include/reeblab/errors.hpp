#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace reeblab {

// Base of every error the library throws on purpose.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Expression evaluation hit a pole, log of a non-positive value, sqrt of a
// negative, or a fractional power of a negative base.  Carries the source
// span of the offending AST node when the expression came from text.
struct DomainError : Error {
    explicit DomainError(const std::string& msg, std::size_t b = 0, std::size_t e = 0)
        : Error(msg), begin(b), end(e) {}
    std::size_t begin, end;
};

struct ParseError : Error {
    ParseError(const std::string& msg, int line, int col,
               std::vector<std::string> expected_tokens = {})
        : Error(format(msg, line, col)), line(line), col(col),
          expected(std::move(expected_tokens)) {}
    int line, col;
    std::vector<std::string> expected;

  private:
    static std::string format(const std::string& msg, int line, int col) {
        return std::to_string(line) + ":" + std::to_string(col) + ": " + msg;
    }
};

// A singular denominator in a one-form does not match the declared critical
// function of the system.
struct CriticalMismatchError : Error {
    using Error::Error;
};

// Configuration document is missing a required key.
struct SchemaError : Error {
    SchemaError(const std::string& msg, std::string path)
        : Error(path + ": " + msg), field_path(std::move(path)) {}
    std::string field_path;
};

// Configuration document is well-formed but violates a cross-field invariant.
struct ValidationError : Error {
    ValidationError(const std::string& msg, std::string path)
        : Error(path + ": " + msg), field_path(std::move(path)) {}
    std::string field_path;
};

struct DimensionError : Error {
    using Error::Error;
};

// Point is inside the guard band around the critical set; ambient singular
// expressions must not be evaluated there.
struct NearCriticalError : Error {
    using Error::Error;
};

// The linear Reeb system is rank deficient beyond the expected corank, i.e.
// the form is not contact at the point.
struct DegenerateError : Error {
    using Error::Error;
};

struct OffLevelSetError : Error {
    using Error::Error;
};

struct SingularPointError : Error {
    using Error::Error;
};

struct MissingDecompositionError : Error {
    using Error::Error;
};

struct DegenerateThetaError : Error {
    using Error::Error;
};

struct OddOrderError : Error {
    using Error::Error;
};

struct NotAlmostConvexError : Error {
    using Error::Error;
};

// Adaptive step size underflowed; the flow hit a singularity or is stiff.
struct StepFailureError : Error {
    using Error::Error;
};

struct NoReturnError : Error {
    using Error::Error;
};

struct NewtonStallError : Error {
    using Error::Error;
};

// Search budget exhausted without meeting the certificate criteria.  Distinct
// from a negative finding.
struct InconclusiveError : Error {
    using Error::Error;
};

struct UnknownSystemError : Error {
    using Error::Error;
};

struct ParamError : Error {
    using Error::Error;
};

struct CollisionError : Error {
    using Error::Error;
};

} // namespace reeblab
