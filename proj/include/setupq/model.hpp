#pragma once

#include <cmath>
#include <string>
#include <type_traits>
#include <variant>

#include "setupq/errors.hpp"

namespace setupq {

/// Parameters of an M/M/k system with deterministic setup.
///
/// Canonical form is (k, rho, mu, beta). The derived quantities are filled in
/// by validate(); construct through from_load() or from_arrival_rate().
struct SystemParams {
    long k = 1;          ///< server count
    double rho = 0.5;    ///< per-server load lambda/mu
    double mu = 1.0;     ///< service rate
    double beta = 0.0;   ///< deterministic setup duration

    // derived
    double offered_load = 0.0;       ///< R = k * rho
    double lambda = 0.0;             ///< per-server arrival rate mu * rho
    double total_arrival_rate = 0.0; ///< k * lambda

    static SystemParams from_load(long k, double rho, double mu, double beta);
    static SystemParams from_arrival_rate(long k, double total_rate, double mu, double beta);

    friend bool operator==(const SystemParams&, const SystemParams&) = default;
};

inline SystemParams validate(SystemParams p)
{
    if (!(p.mu > 0.0) || !std::isfinite(p.mu))
        throw error(errc::NonPositiveRate, "mu must be positive, got " + std::to_string(p.mu));
    if (p.k < 1)
        throw error(errc::ZeroServers, "k must be at least 1, got " + std::to_string(p.k));
    if (!(p.rho > 0.0 && p.rho < 1.0))
        throw error(errc::UnstableLoad, "rho must lie in (0,1), got " + std::to_string(p.rho));
    if (!(p.beta >= 0.0) || !std::isfinite(p.beta))
        throw error(errc::NegativeSetup, "beta must be non-negative, got " + std::to_string(p.beta));

    p.offered_load = static_cast<double>(p.k) * p.rho;
    p.lambda = p.mu * p.rho;
    p.total_arrival_rate = p.mu * p.offered_load;
    return p;
}

inline SystemParams SystemParams::from_load(long k, double rho, double mu, double beta)
{
    SystemParams p;
    p.k = k;
    p.rho = rho;
    p.mu = mu;
    p.beta = beta;
    return validate(p);
}

inline SystemParams SystemParams::from_arrival_rate(long k, double total_rate, double mu, double beta)
{
    if (!(mu > 0.0))
        throw error(errc::NonPositiveRate, "mu must be positive");
    if (k < 1)
        throw error(errc::ZeroServers, "k must be at least 1");
    return from_load(k, total_rate / (static_cast<double>(k) * mu), mu, beta);
}

/// Thresholds under which the closed-form bounds are proven. Data, not a gate.
struct AssumptionRegion {
    double min_offered_load = 100.0;
    double min_relative_setup = 100.0;
};

inline bool in_assumption_region(const SystemParams& p, const AssumptionRegion& region = {})
{
    return p.offered_load >= region.min_offered_load && p.mu * p.beta >= region.min_relative_setup;
}

// Setup policies ------------------------------------------------------------

/// Fixed setup of length beta. buffer = m keeps up to m servers on beyond
/// the jobs present: server i turns off when N drops from i-m to i-m-1.
struct DeterministicSetup {
    long buffer = 0;
    friend bool operator==(const DeterministicSetup&, const DeterministicSetup&) = default;
};

/// Base on/off rule with Exp(mean_setup) setup durations.
struct ExponentialSetup {
    double mean_setup = 1.0;
    friend bool operator==(const ExponentialSetup&, const ExponentialSetup&) = default;
};

/// All k servers always on (plain M/M/k).
struct NoSetup {
    friend bool operator==(const NoSetup&, const NoSetup&) = default;
};

using SetupPolicy = std::variant<DeterministicSetup, ExponentialSetup, NoSetup>;

inline void validate_policy(const SetupPolicy& policy, const SystemParams& p)
{
    if (const auto* det = std::get_if<DeterministicSetup>(&policy)) {
        if (det->buffer < 0 || det->buffer > p.k)
            throw error(errc::InvalidPolicy, "buffer m must satisfy 0 <= m <= k");
    } else if (const auto* ex = std::get_if<ExponentialSetup>(&policy)) {
        if (!(ex->mean_setup > 0.0) || !std::isfinite(ex->mean_setup))
            throw error(errc::InvalidPolicy, "exponential mean setup must be positive");
    }
}

inline long buffer_of(const SetupPolicy& policy)
{
    if (const auto* det = std::get_if<DeterministicSetup>(&policy))
        return det->buffer;
    return 0;
}

inline std::string policy_name(const SetupPolicy& policy)
{
    return std::visit(
        [](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, DeterministicSetup>)
                return v.buffer == 0 ? "deterministic" : "deterministic(m=" + std::to_string(v.buffer) + ")";
            else if constexpr (std::is_same_v<T, ExponentialSetup>)
                return "exponential";
            else
                return "none";
        },
        policy);
}

} // namespace setupq
