#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace setupq {

enum class errc {
    NonPositiveRate,
    UnstableLoad,
    ZeroServers,
    NegativeSetup,
    InvalidPolicy,
    DegenerateDrift,
    NoSurplusServers,
    BufferTooLarge,
    HypothesisViolated,
    InvalidLevel,
    EventCapExceeded,
    NonFiniteTime,
    InvariantViolation,
    CycleTimeout,
    InsufficientReplications,
    ZeroReference,
    Unachievable,
    InvalidArgument,
};

constexpr std::string_view to_string(errc code)
{
    switch (code) {
    case errc::NonPositiveRate: return "NonPositiveRate";
    case errc::UnstableLoad: return "UnstableLoad";
    case errc::ZeroServers: return "ZeroServers";
    case errc::NegativeSetup: return "NegativeSetup";
    case errc::InvalidPolicy: return "InvalidPolicy";
    case errc::DegenerateDrift: return "DegenerateDrift";
    case errc::NoSurplusServers: return "NoSurplusServers";
    case errc::BufferTooLarge: return "BufferTooLarge";
    case errc::HypothesisViolated: return "HypothesisViolated";
    case errc::InvalidLevel: return "InvalidLevel";
    case errc::EventCapExceeded: return "EventCapExceeded";
    case errc::NonFiniteTime: return "NonFiniteTime";
    case errc::InvariantViolation: return "InvariantViolation";
    case errc::CycleTimeout: return "CycleTimeout";
    case errc::InsufficientReplications: return "InsufficientReplications";
    case errc::ZeroReference: return "ZeroReference";
    case errc::Unachievable: return "Unachievable";
    case errc::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class error : public std::runtime_error {
public:
    error(errc code, const std::string& detail)
        : std::runtime_error(std::string(to_string(code)) + ": " + detail)
        , code_(code)
    {
    }

    errc code() const noexcept { return code_; }

private:
    errc code_;
};

} // namespace setupq
