#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numbers>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "setupq/analytic.hpp"
#include "setupq/errors.hpp"
#include "setupq/estimate.hpp"
#include "setupq/model.hpp"
#include "setupq/rng.hpp"
#include "setupq/simengine.hpp"

namespace setupq::oracles {

enum class Relation { AtMost, AtLeast };

/// One checked claim. For AtMost the upper confidence limit is compared to the
/// bound, for AtLeast the lower one; exact checks carry ci = 0.
struct OracleVerdict {
    std::string claim_id;
    Relation relation = Relation::AtMost;
    double estimate = 0.0;
    double ci = 0.0;
    double bound = 0.0;
    double slack = 0.0; ///< margin in the passing direction; negative on failure
    bool passed = false;
    bool asserted = true; ///< false when the claim's hypotheses do not hold
    std::string note;
};

inline OracleVerdict make_verdict(std::string id, Relation rel, double estimate, double ci, double bound,
                                  bool asserted = true, std::string note = {})
{
    OracleVerdict v;
    v.claim_id = std::move(id);
    v.relation = rel;
    v.estimate = estimate;
    v.ci = ci;
    v.bound = bound;
    if (rel == Relation::AtMost)
        v.slack = bound - (estimate + ci);
    else
        v.slack = (estimate - ci) - bound;
    v.passed = v.slack >= 0.0;
    v.asserted = asserted;
    v.note = std::move(note);
    return v;
}

inline bool all_asserted_pass(std::span<const OracleVerdict> verdicts)
{
    for (const auto& v : verdicts)
        if (v.asserted && !v.passed)
            return false;
    return true;
}

// Renewal-cycle claims ---------------------------------------------------------

/// Cycles are gathered in a fixed number of independent chunks so the result
/// does not depend on the thread count.
inline constexpr std::size_t cycle_chunks = 8;

inline sim::CycleStats collect_cycles(const SystemParams& params, std::size_t n_cycles, std::uint64_t seed,
                                      unsigned threads = 0)
{
    if (n_cycles < 2)
        throw error(errc::InsufficientReplications, "need at least 2 cycles");
    const std::size_t chunks = std::min(cycle_chunks, n_cycles / 2);
    auto parts = parallel_indexed(chunks, threads, [&](std::size_t c) {
        sim::SimConfig cfg;
        cfg.seed = seed;
        cfg.replication_index = c;
        const std::size_t n = n_cycles / chunks + (c < n_cycles % chunks ? 1 : 0);
        return sim::run_renewal_cycles(params, cfg, n);
    });

    sim::CycleStats all;
    all.threshold = parts.front().threshold;
    auto append = [](std::vector<double>& dst, const std::vector<double>& src) {
        dst.insert(dst.end(), src.begin(), src.end());
    };
    for (const auto& p : parts) {
        append(all.length, p.length);
        append(all.accumulation_time, p.accumulation_time);
        append(all.excess_integral, p.excess_integral);
        append(all.queue_integral, p.queue_integral);
        append(all.jobs_at_accumulation, p.jobs_at_accumulation);
        append(all.first_long_epoch, p.first_long_epoch);
        all.events += p.events;
        all.epochs_without_long += p.epochs_without_long;
    }
    return all;
}

inline std::string region_note(const SystemParams& p)
{
    return in_assumption_region(p) ? std::string{} : std::string{"outside assumption region; not asserted"};
}

/// E[T_A] <= bound_factor * beta. The lemma gives 1.08; 1.15 absorbs noise.
inline OracleVerdict check_accumulation_time(const SystemParams& params, const sim::CycleStats& cycles,
                                             double bound_factor = 1.15)
{
    const auto est = summarize(cycles.accumulation_time, Quantity::MeanAccumulationTime, cycles.events);
    return make_verdict("accumulation_time", Relation::AtMost, est.mean, est.ci_half_width,
                        bound_factor * params.beta, in_assumption_region(params), region_note(params));
}

inline OracleVerdict check_accumulation_time(const SystemParams& params, std::size_t n_cycles, std::uint64_t seed,
                                             unsigned threads = 0, double bound_factor = 1.15)
{
    return check_accumulation_time(params, collect_cycles(params, n_cycles, seed, threads), bound_factor);
}

/// E[L] >= factor * (2/3)sqrt(pi/2) sqrt(R); factor 0.8 absorbs noise.
inline OracleVerdict check_first_long_epoch(const SystemParams& params, const sim::CycleStats& cycles,
                                            double factor = 0.8, const analytic::BoundConstants& c = {})
{
    const auto est = summarize(cycles.first_long_epoch, Quantity::MeanFirstLongEpoch, cycles.events);
    std::string note = region_note(params);
    if (cycles.epochs_without_long > 0)
        note += (note.empty() ? "" : "; ") + std::to_string(cycles.epochs_without_long)
            + " cycles had no long epoch before T_A";
    return make_verdict("first_long_epoch", Relation::AtLeast, est.mean, est.ci_half_width,
                        factor * c.L1 * std::sqrt(params.offered_load), in_assumption_region(params), note);
}

inline OracleVerdict check_first_long_epoch(const SystemParams& params, std::size_t n_cycles, std::uint64_t seed,
                                            unsigned threads = 0, double factor = 0.8)
{
    return check_first_long_epoch(params, collect_cycles(params, n_cycles, seed, threads), factor);
}

/// First and second moment of N(T_A) - R:
///   E[N(T_A)-R]     <= 2.9 mu beta sqrt(R)
///   E[(N(T_A)-R)^2] <= F1^2 (mu beta)^2 R (1 + F2/sqrt(mu beta))^2 + 2 mu beta R
inline std::vector<OracleVerdict> check_nta(const SystemParams& params, const sim::CycleStats& cycles,
                                            const analytic::BoundConstants& c = {})
{
    const double mb = params.mu * params.beta;
    const double R = params.offered_load;
    const bool asserted = in_assumption_region(params);

    const auto first = summarize(cycles.jobs_at_accumulation, Quantity::MeanNTA, cycles.events);
    std::vector<double> sq(cycles.jobs_at_accumulation.size());
    for (std::size_t i = 0; i < sq.size(); ++i)
        sq[i] = cycles.jobs_at_accumulation[i] * cycles.jobs_at_accumulation[i];
    const auto second = summarize(sq, Quantity::MeanNTA, cycles.events);

    const double shape = 1.0 + c.F2 / std::sqrt(mb);
    const double second_bound = c.F1 * c.F1 * mb * mb * R * shape * shape + 2.0 * mb * R;
    return {
        make_verdict("nta", Relation::AtMost, first.mean, first.ci_half_width, 2.9 * mb * std::sqrt(R), asserted,
                     region_note(params)),
        make_verdict("nta_second_moment", Relation::AtMost, second.mean, second.ci_half_width, second_bound,
                     asserted, region_note(params)),
    };
}

inline std::vector<OracleVerdict> check_nta(const SystemParams& params, std::size_t n_cycles, std::uint64_t seed,
                                            unsigned threads = 0)
{
    return check_nta(params, collect_cycles(params, n_cycles, seed, threads));
}

// Critical M/M/1 busy periods ---------------------------------------------------

/// Busy period of an M/M/1 with arrival and service rate both equal to `rate`,
/// started by one job, observed up to `cap`. Returns min(tau, cap).
inline double sample_critical_busy(double rate, double cap, RandomStream& rng)
{
    double t = 0.0;
    long pos = 1;
    const double step_rate = 2.0 * rate;
    for (;;) {
        t += rng.exponential(step_rate);
        if (t >= cap)
            return cap;
        pos += rng.uniform() < 0.5 ? 1 : -1;
        if (pos == 0)
            return t;
    }
}

/// Exact P(tau > t) for the critical busy period, nu = 2*rate*t: Poisson
/// mixture of the symmetric-walk survival P(gamma > n) = C(n, n/2)/2^n.
inline double exact_critical_busy_tail(double nu)
{
    if (!(nu >= 0.0))
        throw error(errc::InvalidArgument, "nu must be non-negative");
    if (nu == 0.0)
        return 1.0;
    const double spread = 12.0 * std::sqrt(nu) + 40.0;
    const long lo = static_cast<long>(std::max(0.0, std::floor(nu - spread)));
    const long hi = static_cast<long>(std::ceil(nu + spread));
    double total = 0.0;
    for (long n = lo; n <= hi; ++n) {
        const double dn = static_cast<double>(n);
        const double half = std::floor(dn / 2.0);
        const double log_surv
            = std::lgamma(dn + 1.0) - std::lgamma(half + 1.0) - std::lgamma(dn - half + 1.0) - dn * std::log(2.0);
        const double log_pois = -nu + dn * std::log(nu) - std::lgamma(dn + 1.0);
        total += std::exp(log_surv + log_pois);
    }
    return total;
}

/// Exact E[min(beta, tau)] for the critical busy period with both rates
/// `rate`: the integral of the exact tail over [0, beta], taken in s = sqrt(t)
/// where the integrand is smooth.
inline double exact_stopped_busy_mean(double beta, double rate)
{
    if (!(beta >= 0.0) || !(rate > 0.0))
        throw error(errc::InvalidArgument, "need beta >= 0 and rate > 0");
    if (beta == 0.0)
        return 0.0;
    auto f = [rate](double s) { return 2.0 * s * exact_critical_busy_tail(2.0 * rate * s * s); };
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, std::sqrt(beta), 12, 1e-12);
}

inline constexpr std::size_t sample_chunks = 16;

/// min(tau, cap) for n_samples critical busy periods, in chunk order.
inline std::vector<double> sample_critical_busy_many(double rate, double cap, std::size_t n_samples,
                                                     std::uint64_t seed, unsigned threads = 0)
{
    const std::size_t chunks = std::min(sample_chunks, std::max<std::size_t>(n_samples, 1));
    auto parts = parallel_indexed(chunks, threads, [&](std::size_t c) {
        RandomStream rng(seed, 0x6000 + c);
        const std::size_t n = n_samples / chunks + (c < n_samples % chunks ? 1 : 0);
        std::vector<double> v(n);
        for (auto& x : v)
            x = sample_critical_busy(rate, cap, rng);
        return v;
    });
    std::vector<double> all;
    all.reserve(n_samples);
    for (const auto& p : parts)
        all.insert(all.end(), p.begin(), p.end());
    return all;
}

/// Monte-Carlo P(tau >= t) at each t, sandwiched between the tail bounds.
/// Points with nu = 2 R mu t < 3 are skipped with a note.
inline std::vector<OracleVerdict> check_hitting_tails(double R, double mu, std::span<const double> t_grid,
                                                      std::size_t n_samples, std::uint64_t seed,
                                                      unsigned threads = 0, const analytic::BoundConstants& c = {})
{
    std::vector<OracleVerdict> out;
    double t_max = 0.0;
    for (double t : t_grid)
        t_max = std::max(t_max, t);
    const auto samples = sample_critical_busy_many(mu * R, t_max, n_samples, seed, threads);
    const double n = static_cast<double>(samples.size());

    for (double t : t_grid) {
        const double nu = 2.0 * R * mu * t;
        char tag[64];
        std::snprintf(tag, sizeof tag, "t=%g", t);
        if (nu < 3.0) {
            OracleVerdict v;
            v.claim_id = std::string("hitting_tail ") + tag;
            v.asserted = false;
            v.passed = false;
            v.note = "HypothesisViolated: nu < 3, skipped";
            out.push_back(v);
            continue;
        }
        std::size_t survive = 0;
        for (double x : samples)
            if (x >= t)
                ++survive;
        const double p = static_cast<double>(survive) / n;
        const double ci = 1.96 * std::sqrt(std::max(p * (1.0 - p), 1.0 / n) / n);
        out.push_back(make_verdict(std::string("hitting_tail_upper ") + tag, Relation::AtMost, p, ci,
                                   analytic::hitting_tail_upper(nu, c)));
        out.push_back(make_verdict(std::string("hitting_tail_lower ") + tag, Relation::AtLeast, p, ci,
                                   analytic::hitting_tail_lower(nu, c)));
        // exact tail against the upper bound, free of sampling noise
        out.push_back(make_verdict(std::string("hitting_tail_upper_exact ") + tag, Relation::AtMost,
                                   exact_critical_busy_tail(nu), 0.0, analytic::hitting_tail_upper(nu, c)));
        // the printed prefactor b1/sqrt(2); reported only
        out.push_back(make_verdict(std::string("hitting_tail_upper_printed ") + tag, Relation::AtMost,
                                   exact_critical_busy_tail(nu), 0.0,
                                   (c.b1 / std::numbers::sqrt2) * (1.0 / std::sqrt(nu) + c.b2 / std::pow(nu, 1.5)),
                                   false, "printed constant, exact tail; not asserted"));
    }
    return out;
}

/// E[min(beta, tau)] for the critical busy period with both rates mu*R.
inline OracleVerdict check_stopped_busy(double beta, double R, double mu, std::size_t n_samples,
                                        std::uint64_t seed, unsigned threads = 0,
                                        const analytic::BoundConstants& c = {})
{
    const auto samples = sample_critical_busy_many(mu * R, beta, n_samples, seed, threads);
    const auto est = summarize(samples, Quantity::MeanCycleLength);
    const bool asserted = mu * beta >= 100.0 && R >= 100.0;
    return make_verdict("stopped_busy", Relation::AtMost, est.mean, est.ci_half_width,
                        analytic::stopped_busy_mean_upper(beta, R, mu, c), asserted,
                        asserted ? std::string{} : std::string{"outside claim hypotheses; not asserted"});
}

/// b1 sqrt(beta/(mu R)) + 6/(mu R): the stopped-busy bound with the printed
/// coefficient instead of the one its proof yields.
inline double printed_stopped_busy_bound(double beta, double R, double mu, const analytic::BoundConstants& c = {})
{
    return c.b1 * std::sqrt(beta / (mu * R)) + 6.0 / (mu * R);
}

// Exact claims -------------------------------------------------------------------

/// Mean (R+h-1) -> (R+h) passage of the M/M/inf against 7/(mu sqrt R), for
/// h = 1..floor(sqrt R). Below R = 100 verdicts are reported, not asserted.
inline std::vector<OracleVerdict> check_mminf_passage(std::span<const double> R_list, double mu)
{
    std::vector<OracleVerdict> out;
    for (double R : R_list) {
        const long h_max = static_cast<long>(std::floor(std::sqrt(R)));
        const double bound = 7.0 / (mu * std::sqrt(R));
        for (long h = 1; h <= h_max; ++h) {
            char tag[96];
            std::snprintf(tag, sizeof tag, "mminf_passage R=%g h=%ld", R, h);
            const bool asserted = R >= 100.0;
            out.push_back(make_verdict(tag, Relation::AtMost, analytic::mminf_passage_mean(R, h, mu), 0.0, bound,
                                       asserted, asserted ? "" : "R below the large-system regime"));
        }
    }
    return out;
}

/// Total mass of catalan_hitting_pmf. Terms are summed until negligible; at
/// p = 1/2 the series converges too slowly, so the partial sum over
/// ell < n_terms is completed with the exact tail P(gamma > 2 n_terms - 1).
inline double catalan_total_mass(double p, long n_terms = 200000)
{
    double sum = 0.0;
    if (p == 0.5) {
        for (long l = 0; l < n_terms; ++l)
            sum += analytic::catalan_hitting_pmf(p, l);
        const double n = static_cast<double>(2 * n_terms - 1);
        const double half = std::floor(n / 2.0);
        const double tail = std::exp(std::lgamma(n + 1.0) - std::lgamma(half + 1.0) - std::lgamma(n - half + 1.0)
                                     - n * std::log(2.0));
        return sum + tail;
    }
    for (long l = 0; l < n_terms; ++l) {
        const double term = analytic::catalan_hitting_pmf(p, l);
        sum += term;
        if (l > 10 && term < 1e-18)
            break;
    }
    return sum;
}

/// Sum of the hitting pmf equals 1 for p <= 1/2 (recurrent or downward drift).
inline std::vector<OracleVerdict> check_catalan_sum(std::span<const double> p_list, double tolerance = 1e-6)
{
    std::vector<OracleVerdict> out;
    for (double p : p_list) {
        char tag[64];
        std::snprintf(tag, sizeof tag, "catalan_sum p=%g", p);
        const double mass = catalan_total_mass(p);
        OracleVerdict v = make_verdict(tag, Relation::AtMost, std::abs(mass - 1.0), 0.0, tolerance);
        v.note = "estimate is |sum - 1|";
        out.push_back(v);
    }
    return out;
}

// m-policy ---------------------------------------------------------------------

struct MPolicyPoint {
    long m = 0;
    SimEstimate queue;
    SimEstimate wait;
    double mean_powered = 0.0;
    double wait_reduction = 0.0; ///< 1 - wait(m)/wait(m=0); 0 when m=0 is absent
};

struct MPolicyReport {
    std::vector<OracleVerdict> verdicts;
    std::vector<MPolicyPoint> curve;
};

/// Simulated E[Q] - CI >= q_lower_mpolicy for every m, all m sharing seeds.
inline MPolicyReport check_mpolicy_bound(const SystemParams& params, std::span<const long> m_list,
                                         const sim::SimConfig& cfg, std::size_t n_replications,
                                         unsigned threads = 0, const analytic::BoundConstants& c = {})
{
    MPolicyReport rep;
    double base_wait = std::numeric_limits<double>::quiet_NaN();
    for (long m : m_list) {
        const auto est = estimate(params, DeterministicSetup{m}, cfg, n_replications, threads);
        MPolicyPoint pt{m, est.queue, est.wait, est.mean_powered, 0.0};
        if (m == 0)
            base_wait = est.wait.mean;
        rep.curve.push_back(pt);
        rep.verdicts.push_back(make_verdict("mpolicy_lower m=" + std::to_string(m), Relation::AtLeast,
                                            est.queue.mean, est.queue.ci_half_width,
                                            analytic::q_lower_mpolicy(params, m, c),
                                            in_assumption_region(params), region_note(params)));
    }
    if (std::isfinite(base_wait))
        for (auto& pt : rep.curve)
            pt.wait_reduction = 1.0 - pt.wait.mean / base_wait;
    return rep;
}

// Manifest -----------------------------------------------------------------------

inline std::string format_real(double x)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline void write_manifest_csv(std::ostream& os, std::span<const OracleVerdict> verdicts)
{
    os << "claim_id,relation,estimate,ci,bound,slack,passed,asserted,note\n";
    for (const auto& v : verdicts) {
        os << v.claim_id << ',' << (v.relation == Relation::AtMost ? "<=" : ">=") << ',' << format_real(v.estimate)
           << ',' << format_real(v.ci) << ',' << format_real(v.bound) << ',' << format_real(v.slack) << ','
           << (v.passed ? "true" : "false") << ',' << (v.asserted ? "true" : "false") << ',' << v.note << '\n';
    }
}

// Suite ----------------------------------------------------------------------------

struct VerifyOptions {
    std::vector<std::string> claims; ///< empty = all
    std::uint64_t seed = 20240601;
    double budget = 1.0;            ///< multiplies every sample count
    double slack = -1.0;            ///< uniform relative slack; negative keeps per-claim defaults
    unsigned threads = 0;
};

inline const std::vector<std::string>& known_claims()
{
    static const std::vector<std::string> names{
        "accumulation_time", "first_long_epoch", "nta",  "hitting_tails",
        "stopped_busy",      "mminf_passage",    "catalan_sum", "mpolicy",
    };
    return names;
}

/// Runs the selected claims at the reference point k=250, rho=0.4, mu=1,
/// beta=100. Throws InvalidArgument on an unknown claim name.
inline std::vector<OracleVerdict> run_verify(const VerifyOptions& opt)
{
    for (const auto& c : opt.claims) {
        bool ok = false;
        for (const auto& k : known_claims())
            ok = ok || c == k;
        if (!ok)
            throw error(errc::InvalidArgument, "unknown claim '" + c + "'");
    }
    if (!(opt.budget > 0.0))
        throw error(errc::InvalidArgument, "budget must be positive");
    auto wanted = [&](std::string_view name) {
        if (opt.claims.empty())
            return true;
        for (const auto& c : opt.claims)
            if (c == name)
                return true;
        return false;
    };
    auto scaled = [&](double n) { return std::max<std::size_t>(16, static_cast<std::size_t>(std::llround(n * opt.budget))); };

    const auto ref = SystemParams::from_load(250, 0.4, 1.0, 100.0);
    std::vector<OracleVerdict> out;

    if (wanted("accumulation_time") || wanted("first_long_epoch") || wanted("nta")) {
        const auto cycles = collect_cycles(ref, scaled(10000), opt.seed, opt.threads);
        if (wanted("accumulation_time")) {
            const double factor = opt.slack >= 0.0 ? 1.08 * (1.0 + opt.slack) : 1.15;
            out.push_back(check_accumulation_time(ref, cycles, factor));
        }
        if (wanted("first_long_epoch")) {
            const double factor = opt.slack >= 0.0 ? 1.0 - opt.slack : 0.8;
            out.push_back(check_first_long_epoch(ref, cycles, factor));
        }
        if (wanted("nta"))
            for (auto& v : check_nta(ref, cycles))
                out.push_back(std::move(v));
    }
    if (wanted("hitting_tails")) {
        const double grid[] = {0.05, 0.2, 1.0, 5.0};
        for (auto& v : check_hitting_tails(50.0, 1.0, grid, scaled(1e7), opt.seed + 1, opt.threads))
            out.push_back(std::move(v));
    }
    if (wanted("stopped_busy")) {
        const auto v = check_stopped_busy(100.0, 100.0, 1.0, scaled(1e6), opt.seed + 2, opt.threads);
        out.push_back(v);
        out.push_back(make_verdict("stopped_busy_exact", Relation::AtMost, exact_stopped_busy_mean(100.0, 100.0), 0.0,
                                   analytic::stopped_busy_mean_upper(100.0, 100.0, 1.0)));
        // printed coefficient b1 on the sqrt term; reported only
        const double printed = printed_stopped_busy_bound(100.0, 100.0, 1.0);
        out.push_back(make_verdict("stopped_busy_printed", Relation::AtMost, v.estimate, v.ci, printed, false,
                                   "printed constant; not asserted"));
    }
    if (wanted("mminf_passage")) {
        const double rs[] = {100.0, 400.0, 10000.0};
        for (auto& v : check_mminf_passage(rs, 1.0))
            out.push_back(std::move(v));
    }
    if (wanted("catalan_sum")) {
        const double ps[] = {0.1, 0.3, 0.45, 0.5};
        for (auto& v : check_catalan_sum(ps))
            out.push_back(std::move(v));
    }
    if (wanted("mpolicy")) {
        const long ms[] = {0, 1, 5, 10};
        sim::SimConfig cfg;
        cfg.seed = opt.seed + 3;
        cfg.warmup = sim::default_warmup(ref);
        cfg.horizon = cfg.warmup + 2e4;
        const auto reps = std::max<std::size_t>(2, static_cast<std::size_t>(std::llround(4.0 * opt.budget)));
        for (auto& v : check_mpolicy_bound(ref, ms, cfg, reps, opt.threads).verdicts)
            out.push_back(std::move(v));
    }
    return out;
}

} // namespace setupq::oracles
