#ifndef PETSEG_ERRORS_HPP
#define PETSEG_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace petseg {

// Base class for all toolkit errors. Each concrete error carries a stable
// machine-readable kind string and a distinct process exit code so shell
// pipelines can branch on failure class.
class Error : public std::runtime_error {
public:
    Error(std::string kind, int exit_code, const std::string& msg)
        : std::runtime_error(msg), kind_(std::move(kind)), exit_code_(exit_code) {}

    const std::string& kind() const { return kind_; }
    int exit_code() const { return exit_code_; }

private:
    std::string kind_;
    int exit_code_;
};

#define PETSEG_DEFINE_ERROR(NAME, KIND, CODE)                          \
    class NAME : public Error {                                        \
    public:                                                            \
        explicit NAME(const std::string& msg) : Error(KIND, CODE, msg) {} \
    }

PETSEG_DEFINE_ERROR(IoError, "io", 3);
PETSEG_DEFINE_ERROR(FormatError, "format", 4);
PETSEG_DEFINE_ERROR(UnsupportedDtypeError, "unsupported_dtype", 5);
PETSEG_DEFINE_ERROR(TruncationError, "truncation", 6);
PETSEG_DEFINE_ERROR(DimensionalityError, "dimensionality", 7);
PETSEG_DEFINE_ERROR(ValidationError, "validation", 8);
PETSEG_DEFINE_ERROR(GridError, "grid", 9);
PETSEG_DEFINE_ERROR(ShapeError, "shape", 10);
PETSEG_DEFINE_ERROR(RangeError, "range", 11);
PETSEG_DEFINE_ERROR(ConfigError, "config", 12);
PETSEG_DEFINE_ERROR(EmptyInputError, "empty_input", 13);
PETSEG_DEFINE_ERROR(InfeasibleSplitError, "infeasible_split", 14);

#undef PETSEG_DEFINE_ERROR

} // namespace petseg

#endif
