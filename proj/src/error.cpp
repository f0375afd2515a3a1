#include "epbattery/error.hpp"

namespace epbattery {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidParameter: return "InvalidParameter";
        case ErrorCode::ZeroCoupling: return "ZeroCoupling";
        case ErrorCode::NegativeDamping: return "NegativeDamping";
        case ErrorCode::AsymmetricDetuning: return "AsymmetricDetuning";
        case ErrorCode::NonzeroAuxDetuning: return "NonzeroAuxDetuning";
        case ErrorCode::DegenerateSpectrum: return "DegenerateSpectrum";
        case ErrorCode::NotAtEP: return "NotAtEP";
        case ErrorCode::AsymmetricParams: return "AsymmetricParams";
        case ErrorCode::NotBroken: return "NotBroken";
        case ErrorCode::NoBracket: return "NoBracket";
        case ErrorCode::NoThreshold: return "NoThreshold";
        case ErrorCode::StepUnderflow: return "StepUnderflow";
    }
    return "Unknown";
}

}  // namespace epbattery
