#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>

namespace greenop {

// std::to_string(double) is fixed-point and flattens small magnitudes to
// 0.000000; use this for numbers embedded in error messages.
inline std::string fmt_num(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

// Base for every library error. `code()` is a stable machine-parseable tag;
// the CLI maps codes to exit statuses (validation -> 2, numerical -> 3).
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& what)
        : std::runtime_error(code + ": " + what), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

#define GREENOP_DEFINE_ERROR(NAME)                                 \
    class NAME : public Error {                                    \
    public:                                                        \
        explicit NAME(const std::string& what) : Error(#NAME, what) {} \
    }

// Grid / function-space errors.
GREENOP_DEFINE_ERROR(NonCommensurateShift);
GREENOP_DEFINE_ERROR(EmptyOverlap);
GREENOP_DEFINE_ERROR(GridMismatch);
GREENOP_DEFINE_ERROR(WindowTooLong);

// Spectral errors.
GREENOP_DEFINE_ERROR(NotHyperbolic);
GREENOP_DEFINE_ERROR(NumericalFailure);

// Solver errors.
GREENOP_DEFINE_ERROR(HorizonTooShort);
GREENOP_DEFINE_ERROR(ContractionViolated);
GREENOP_DEFINE_ERROR(MaxIterExceeded);

// Averaging errors.
GREENOP_DEFINE_ERROR(StationaryContractionViolated);
GREENOP_DEFINE_ERROR(OmegaTableTooCoarse);
GREENOP_DEFINE_ERROR(DomainTooShort);

#undef GREENOP_DEFINE_ERROR

}  // namespace greenop
