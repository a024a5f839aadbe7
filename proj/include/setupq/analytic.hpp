#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "setupq/errors.hpp"
#include "setupq/model.hpp"

/// Closed-form quantities for the M/M/k queue with deterministic setup.
///
/// All functions are pure. Queue lengths are in jobs, waits in the time unit
/// of 1/mu. Every expression is written so that rescaling time (mu -> a*mu,
/// beta -> beta/a) leaves queue lengths unchanged.
namespace setupq::analytic {

inline constexpr double sqrt_pi_over_2 = 1.2533141373155002512; // sqrt(pi/2)
inline constexpr double sqrt_2_over_pi = 0.79788456080286535588; // sqrt(2/pi)

/// Numeric constants appearing in the bounds. Defaults are the published values;
/// D1..D3 are never given numerically in the lower-bound statement, so the
/// defaults are the values used inside its supporting lemmas.
struct BoundConstants {
    double L1 = (2.0 / 3.0) * sqrt_pi_over_2;
    double C_apx = sqrt_pi_over_2;
    double F1 = 2.12;
    double F2 = 3.645;
    double b1 = sqrt_2_over_pi;
    double b2 = 1.0 + 2.5 / (sqrt_2_over_pi * std::numbers::sqrt2);
    double D1 = sqrt_2_over_pi;
    double D2 = 7.0;
    double D3 = 6.0;
    double mpol_F2 = 0.23;
    double mpol_F3 = 2.6;
    double mpol_F4 = 7.2;

    bool valid() const
    {
        for (double v : {L1, C_apx, F1, F2, b1, b2, D1, D2, D3, mpol_F2, mpol_F3, mpol_F4})
            if (!(v > 0.0) || !std::isfinite(v))
                return false;
        return L1 < C_apx;
    }
};

inline double positive_part(double x) { return x > 0.0 ? x : 0.0; }

// Busy periods ---------------------------------------------------------------

/// Mean length of an M/M/1 busy period started by n jobs whose service rate
/// exceeds the arrival rate by mu*j.
inline double busy_period_length(double n, double j, double mu)
{
    if (!(j > 0.0))
        throw error(errc::DegenerateDrift, "surplus j must be positive");
    return n / (mu * j);
}

/// Mean time integral of the number of jobs over the same busy period.
inline double busy_period_integral(double n, double j, double R, double mu)
{
    if (!(j > 0.0))
        throw error(errc::DegenerateDrift, "surplus j must be positive");
    return (n / (mu * j)) * ((n + 1.0) / 2.0 + R / j + 1.0);
}

// Approximations -------------------------------------------------------------

/// Two-term renewal-ratio approximation of E[Q]. Valid for R > 1; returns 0 at
/// beta = 0 by continuity.
inline double q_approx(const SystemParams& p, const BoundConstants& c = {})
{
    if (p.beta == 0.0)
        return 0.0;
    const double mu = p.mu;
    const double beta = p.beta;
    const double one_minus_rho = 1.0 - p.rho;
    const double surplus_rate = mu * static_cast<double>(p.k) * one_minus_rho;
    const double scaled = mu * beta * c.C_apx * std::sqrt(p.offered_load);

    const double num = 0.5 * mu * beta * beta * c.C_apx * std::sqrt(p.offered_load)
        + (scaled / surplus_rate) * ((scaled + 1.0) / 2.0 + 1.0 / one_minus_rho);
    const double den = beta + scaled / surplus_rate;
    return num / den;
}

/// Single-server-bottleneck approximation for R < 1, as a queue length.
inline double q_low_r(const SystemParams& p)
{
    const double x = p.mu * p.offered_load * p.beta;
    const double wait = (p.beta / 2.0) * (2.0 + x) / (1.0 + x);
    return p.total_arrival_rate * wait;
}

/// Order-level surrogate mu*beta*sqrt(R) + 1/(1-rho) that both bounds sandwich.
inline double tightness_simplified(const SystemParams& p)
{
    return p.mu * p.beta * std::sqrt(p.offered_load) + 1.0 / (1.0 - p.rho);
}

// Bounds ---------------------------------------------------------------------

inline double q_upper(const SystemParams& p, const BoundConstants& c = {})
{
    const double mu = p.mu;
    const double beta = p.beta;
    const double R = p.offered_load;
    const double sqrt_r = std::sqrt(R);
    const double mb = mu * beta;
    const double surplus = static_cast<double>(p.k) * (1.0 - p.rho);

    auto g = [&](double x, double y, double z) {
        return x / (2.0 * mu * z) + y * (R / (mu * z * z) + 3.0 / (2.0 * mu * z));
    };

    const double head = 3.6 * std::sqrt(mb * R) + 2.04 * p.rho / (1.0 - p.rho);
    const double num = 4.05 * mu * beta * beta * sqrt_r + g(9.0 * mb * mb * R, 3.0 * mb * sqrt_r, surplus);
    const double den = beta + c.L1 * mb * sqrt_r / (mu * surplus);
    if (den == 0.0)
        return head;
    return head + num / den;
}

struct LowerBoundDetail {
    double value = 0.0;
    double numerator = 0.0;
    double denominator = 0.0;
    bool denominator_clamped = false; ///< denominator fell below beta and was floored
};

inline LowerBoundDetail q_lower_detail(const SystemParams& p, const BoundConstants& c = {})
{
    const double R = p.offered_load;
    const double surplus = static_cast<double>(p.k) - R;
    if (!(surplus > 0.0))
        throw error(errc::NoSurplusServers, "lower bound needs k > R");

    const double mu = p.mu;
    const double beta = p.beta;
    const double sqrt_r = std::sqrt(R);
    const double mb = mu * beta;

    LowerBoundDetail out;
    const double excess = positive_part(c.L1 * mb * sqrt_r - surplus);
    out.numerator = c.L1 * mu * beta * beta * sqrt_r + busy_period_integral(excess, surplus, R, mu);

    double den = 2.08 * beta + c.F1 * beta * sqrt_r / surplus;
    if (mb > 0.0)
        den += 1.5 * std::log(mb) / mu;
    else
        den = -std::numeric_limits<double>::infinity();
    den += std::log(c.F1 * c.D1) / mu + 2.0 / mu;
    const double tail_scale = mb > 0.0 ? std::max(1.0 / (c.D1 * std::sqrt(mb)), 1.0 / sqrt_r) : 1.0 / sqrt_r;
    den += (c.D2 + c.D3 / sqrt_r) * tail_scale / mu;
    if (!(den >= beta)) {
        den = beta;
        out.denominator_clamped = true;
    }
    out.denominator = den;
    out.value = den > 0.0 ? out.numerator / den : 0.0;
    return out;
}

inline double q_lower(const SystemParams& p, const BoundConstants& c = {})
{
    return q_lower_detail(p, c).value;
}

/// Lower bound for the m-buffer policy; holds for any m <= sqrt(R).
inline double q_lower_mpolicy(const SystemParams& p, long m, const BoundConstants& c = {})
{
    const double R = p.offered_load;
    const double sqrt_r = std::sqrt(R);
    if (m < 0 || static_cast<double>(m) > sqrt_r)
        throw error(errc::BufferTooLarge, "m-policy bound requires 0 <= m <= sqrt(R)");
    const double surplus = static_cast<double>(p.k) - R;
    if (!(surplus > 0.0))
        throw error(errc::NoSurplusServers, "m-policy bound needs k > R");

    const double mu = p.mu;
    const double beta = p.beta;
    const double mb = mu * beta;
    const double excess = positive_part(c.mpol_F2 * mb * sqrt_r - surplus);
    const double num = c.mpol_F2 * mu * beta * beta * sqrt_r + busy_period_integral(excess, surplus, R, mu);
    const double den = c.mpol_F3 * beta + c.mpol_F4 * mb * sqrt_r / (mu * std::min(surplus, sqrt_r));
    return den > 0.0 ? num / den : 0.0;
}

// Baselines ------------------------------------------------------------------

/// Erlang-C delay probability via the Erlang-B recurrence (no factorials).
inline double erlang_c_probability(long k, double rho)
{
    if (!(rho > 0.0 && rho < 1.0))
        throw error(errc::UnstableLoad, "rho must lie in (0,1)");
    if (k < 1)
        throw error(errc::ZeroServers, "k must be at least 1");
    const double a = static_cast<double>(k) * rho;
    double b = 1.0;
    for (long n = 1; n <= k; ++n)
        b = a * b / (static_cast<double>(n) + a * b);
    return b / (1.0 - rho * (1.0 - b));
}

/// Mean wait in queue of the M/M/k without setup.
inline double erlang_c_wait(long k, double rho, double mu)
{
    if (!(mu > 0.0))
        throw error(errc::NonPositiveRate, "mu must be positive");
    const double c = erlang_c_probability(k, rho);
    return c / (static_cast<double>(k) * mu * (1.0 - rho));
}

/// M/M/1 wait plus the exact exceptional-first-service setup penalty.
inline double welch_mm1_setup_wait(double lambda, double mu, double beta)
{
    if (!(lambda >= 0.0 && lambda < mu))
        throw error(errc::UnstableLoad, "need 0 <= lambda < mu");
    const double x = lambda * beta;
    return lambda / (mu * (mu - lambda)) + (beta / 2.0) * (2.0 + x) / (1.0 + x);
}

// Hitting times --------------------------------------------------------------

/// Upper bound on P(busy period >= t) for the walk with up-rate mu*R and
/// down-rate mu*(R-j), in terms of nu = (2R-j)*mu*t.
///
/// The leading coefficient is b1 (the value the tail argument actually yields
/// and the one used downstream); the exact tail of the critical walk is about
/// b1/sqrt(nu), so a b1/sqrt(2) prefactor would undershoot it.
inline double hitting_tail_upper(double nu, const BoundConstants& c = {})
{
    if (!(nu >= 3.0))
        throw error(errc::HypothesisViolated, "tail bound needs nu >= 3");
    return c.b1 * (1.0 / std::sqrt(nu) + c.b2 / std::pow(nu, 1.5));
}

/// Lower bound on the same tail, critical case j = 0.
inline double hitting_tail_lower(double nu, const BoundConstants& c = {})
{
    if (!(nu >= 3.0))
        throw error(errc::HypothesisViolated, "tail bound needs nu >= 3");
    return (c.b1 / std::numbers::sqrt2) * std::exp(-1.0 / (3.0 * (nu - 1.0))) / std::sqrt(nu + 2.0);
}

/// Bound on E[min(beta, tau)] for a critical M/M/1 busy period (both rates mu*R)
/// started by one job: integrating hitting_tail_upper gives sqrt(2)*b1 = 2/sqrt(pi)
/// on the sqrt(beta/(mu R)) term.
inline double stopped_busy_mean_upper(double beta, double R, double mu, const BoundConstants& c = {})
{
    const double rate = mu * R;
    if (!(rate > 0.0))
        throw error(errc::InvalidArgument, "mu*R must be positive");
    return std::numbers::sqrt2 * c.b1 * std::sqrt(beta / rate) + 6.0 / rate;
}

/// Exact mean return time to the top state R+h of an M/M/(R+h)/(R+h) loss
/// system with offered load R: the M/M/inf passage (R+h-1) -> (R+h) plus the
/// holding time 1/(mu(R+h)) at the top, hence an upper bound on the passage.
/// Non-integer R uses ceil(R) for the state index.
inline double mminf_passage_mean(double R, long h, double mu)
{
    if (h < 1)
        throw error(errc::InvalidLevel, "level offset h must be >= 1");
    if (!(R > 0.0) || !(mu > 0.0))
        throw error(errc::InvalidArgument, "R and mu must be positive");
    const long top = static_cast<long>(std::ceil(R)) + h;
    // sum_{i=0}^{top} R^i/i! divided by R^top/top!, accumulated downwards as
    // log(term) with a running log-sum-exp so large h cannot overflow.
    double log_term = 0.0;
    double log_sum = 0.0;
    for (long i = top; i >= 1; --i) {
        log_term += std::log(static_cast<double>(i) / R);
        const double hi = std::max(log_sum, log_term);
        log_sum = hi + std::log(std::exp(log_sum - hi) + std::exp(log_term - hi));
        if (log_term < log_sum - 45.0 && static_cast<double>(i) < R)
            break;
    }
    return std::exp(log_sum - std::log(mu * static_cast<double>(top)));
}

/// P(gamma = 2*ell + 1) for the +-1 walk from 1 with up-probability p, where
/// gamma is the first passage to 0. Catalan numbers handled in log space.
inline double catalan_hitting_pmf(double p, long ell)
{
    if (!(p >= 0.0 && p <= 1.0))
        throw error(errc::InvalidArgument, "p must lie in [0,1]");
    if (ell < 0)
        throw error(errc::InvalidArgument, "ell must be non-negative");
    const double q = 1.0 - p;
    if (ell == 0)
        return q;
    if (p == 0.0 || q == 0.0)
        return 0.0;
    const double l = static_cast<double>(ell);
    const double log_catalan = std::lgamma(2.0 * l + 1.0) - 2.0 * std::lgamma(l + 1.0) - std::log(l + 1.0);
    return std::exp(std::log(q) + l * std::log(q * p) + log_catalan);
}

// Report ---------------------------------------------------------------------

struct BoundsReport {
    double q_approx = 0.0;
    double q_upper = 0.0;
    double q_lower = 0.0;
    double q_low_r = 0.0;
    double t_approx = 0.0;
    double t_upper = 0.0;
    double t_lower = 0.0;
    double tightness_ratio = 0.0;
    bool in_region = false;
    bool lower_available = true;   ///< false when k <= R
    bool lower_clamped = false;    ///< lower-bound denominator floored at beta
    double erlang_c_wait = 0.0;    ///< no-setup baseline for comparison
};

inline BoundsReport bounds_report(const SystemParams& p, const BoundConstants& c = {},
                                  const AssumptionRegion& region = {})
{
    BoundsReport r;
    r.in_region = in_assumption_region(p, region);
    r.q_approx = q_approx(p, c);
    r.q_upper = q_upper(p, c);
    r.q_low_r = q_low_r(p);
    try {
        const auto lower = q_lower_detail(p, c);
        r.q_lower = lower.value;
        r.lower_clamped = lower.denominator_clamped;
    } catch (const error& e) {
        if (e.code() != errc::NoSurplusServers)
            throw;
        r.q_lower = 0.0;
        r.lower_available = false;
    }
    const double rate = p.total_arrival_rate;
    r.t_approx = r.q_approx / rate;
    r.t_upper = r.q_upper / rate;
    r.t_lower = r.q_lower / rate;
    r.tightness_ratio = r.q_lower > 0.0 ? r.q_upper / r.q_lower : std::numeric_limits<double>::infinity();
    r.erlang_c_wait = erlang_c_wait(p.k, p.rho, p.mu);
    return r;
}

} // namespace setupq::analytic
