#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace epbattery {

enum class ErrorCode {
    InvalidParameter,
    ZeroCoupling,
    NegativeDamping,
    AsymmetricDetuning,
    NonzeroAuxDetuning,
    DegenerateSpectrum,
    NotAtEP,
    AsymmetricParams,
    NotBroken,
    NoBracket,
    NoThreshold,
    StepUnderflow,
};

[[nodiscard]] std::string_view to_string(ErrorCode code) noexcept;

/// Domain error raised by the library. Carries a machine-readable code so the
/// CLI can map it onto an exit status and a one-line error record.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace epbattery
