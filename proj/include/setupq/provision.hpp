#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "setupq/analytic.hpp"
#include "setupq/errors.hpp"
#include "setupq/estimate.hpp"
#include "setupq/model.hpp"
#include "setupq/simengine.hpp"

namespace setupq::provision {

enum class WaitModel { DetApprox, LowR, UpperBound, ErlangC };

constexpr std::string_view to_string(WaitModel m)
{
    switch (m) {
    case WaitModel::DetApprox: return "det-approx";
    case WaitModel::LowR: return "low-r";
    case WaitModel::UpperBound: return "upper-bound";
    case WaitModel::ErlangC: return "erlang-c";
    }
    return "unknown";
}

inline std::optional<WaitModel> parse_wait_model(std::string_view s)
{
    for (auto m : {WaitModel::DetApprox, WaitModel::LowR, WaitModel::UpperBound, WaitModel::ErlangC})
        if (s == to_string(m))
            return m;
    return std::nullopt;
}

/// Predicted mean queueing delay at k servers. Setup models are floored at
/// the Erlang-C wait, and every model is Erlang-C at beta = 0.
inline double predicted_wait(WaitModel model, long k, double rho, double mu, double beta)
{
    const auto p = SystemParams::from_load(k, rho, mu, beta);
    const double erlang = analytic::erlang_c_wait(k, rho, mu);
    if (beta == 0.0)
        return erlang;
    switch (model) {
    case WaitModel::ErlangC: return erlang;
    case WaitModel::DetApprox: return std::max(erlang, analytic::q_approx(p) / p.total_arrival_rate);
    case WaitModel::LowR: return std::max(erlang, analytic::q_low_r(p) / p.total_arrival_rate);
    case WaitModel::UpperBound: return std::max(erlang, analytic::q_upper(p) / p.total_arrival_rate);
    }
    return erlang;
}

struct SearchResult {
    long k = 0;
    double predicted_wait = 0.0;
    bool non_monotone = false; ///< evaluations rose with k somewhere; linear scan used
    long evaluations = 0;
};

/// Smallest k in [1, k_max] with predictor(k) <= target: exponential
/// bracketing, then binary search. If the evaluated points are not
/// non-increasing in k the predictor is not monotone, and a linear scan below
/// the bracket decides.
inline SearchResult min_k_for(const std::function<double(long)>& predictor, double target, long k_max)
{
    if (!(target > 0.0))
        throw error(errc::InvalidArgument, "target wait must be positive");
    if (k_max < 1)
        throw error(errc::InvalidArgument, "k_max must be at least 1");

    SearchResult res;
    std::map<long, double> seen;
    auto eval = [&](long k) {
        ++res.evaluations;
        const double w = predictor(k);
        seen[k] = w;
        return w;
    };

    long lo = 0; // predictor(lo) > target, or lo = 0
    long hi = 1;
    double w_hi = eval(hi);
    while (w_hi > target) {
        if (hi >= k_max)
            throw error(errc::Unachievable, "target not met even at k = " + std::to_string(k_max));
        lo = hi;
        hi = std::min(k_max, hi * 2);
        w_hi = eval(hi);
    }
    while (hi - lo > 1) {
        const long mid = lo + (hi - lo) / 2;
        const double w = eval(mid);
        if (w <= target) {
            hi = mid;
            w_hi = w;
        } else {
            lo = mid;
        }
    }
    res.k = hi;
    res.predicted_wait = w_hi;

    double prev = std::numeric_limits<double>::infinity();
    for (const auto& [k, w] : seen) {
        if (w > prev) {
            res.non_monotone = true;
            break;
        }
        prev = w;
    }
    if (res.non_monotone) {
        for (long k = 1; k < hi; ++k) {
            const double w = seen.count(k) ? seen[k] : eval(k);
            if (w <= target) {
                res.k = k;
                res.predicted_wait = w;
                break;
            }
        }
    }
    return res;
}

inline SearchResult min_servers_for_wait(double target_wait, double rho, double mu, double beta, WaitModel model,
                                         long k_max = 10'000'000)
{
    if (!(target_wait > 0.0))
        throw error(errc::InvalidArgument, "target wait must be positive");
    validate(SystemParams{1, rho, mu, beta});
    return min_k_for([&](long k) { return predicted_wait(model, k, rho, mu, beta); }, target_wait, k_max);
}

// Simulation-backed search ------------------------------------------------------

struct SimSearchOptions {
    std::uint64_t seed = 17;
    std::size_t coarse_replications = 2;
    std::size_t fine_replications = 6;
    double horizon_setups = 200.0; ///< measurement window in units of max(beta, 1/mu)
    long k_max = 100'000;
    unsigned threads = 0;
};

struct SimSearchResult {
    long k = 0;
    SimEstimate wait;                ///< fine estimate at k
    std::optional<SimEstimate> wait_below; ///< fine estimate at k-1
    long probes = 0;
};

inline sim::SimConfig search_config(const SystemParams& p, const SimSearchOptions& opt)
{
    sim::SimConfig cfg;
    cfg.seed = opt.seed;
    cfg.warmup = sim::default_warmup(p);
    cfg.horizon = cfg.warmup + opt.horizon_setups * std::max(p.beta, 1.0 / p.mu);
    return cfg;
}

inline SimEstimate simulated_wait(const SystemParams& p, const SetupPolicy& policy, const SimSearchOptions& opt,
                                  std::size_t reps)
{
    return estimate(p, policy, search_config(p, opt), reps, opt.threads).wait;
}

/// Smallest k whose simulated wait meets the target under `make_policy(beta)`:
/// coarse estimates drive the bracket and bisection, fine estimates settle k
/// against k-1 at the end.
inline SimSearchResult min_servers_by_simulation(double target_wait, double rho, double mu, double beta,
                                                 const std::function<SetupPolicy(double)>& make_policy,
                                                 const SimSearchOptions& opt = {})
{
    SimSearchResult out;
    auto wait_at = [&](long k, std::size_t reps) {
        ++out.probes;
        return simulated_wait(SystemParams::from_load(k, rho, mu, beta), make_policy(beta), opt, reps);
    };
    const auto coarse = min_k_for([&](long k) { return wait_at(k, opt.coarse_replications).mean; }, target_wait,
                                  opt.k_max);
    long k = coarse.k;
    SimEstimate at = wait_at(k, opt.fine_replications);
    for (int step = 0; step < 16 && at.mean > target_wait && k < opt.k_max; ++step)
        at = wait_at(++k, opt.fine_replications);
    for (int step = 0; step < 16 && k > 1; ++step) {
        const SimEstimate below = wait_at(k - 1, opt.fine_replications);
        if (below.mean > target_wait) {
            out.wait_below = below;
            break;
        }
        --k;
        at = below;
    }
    out.k = k;
    out.wait = at;
    return out;
}

/// Exponential-setup policy with mean beta; NoSetup when beta = 0.
inline SetupPolicy exponential_policy(double beta)
{
    if (beta > 0.0)
        return ExponentialSetup{beta};
    return NoSetup{};
}

inline SetupPolicy deterministic_policy(double /*beta*/) { return DeterministicSetup{0}; }

/// Confirms an analytic answer: simulated wait at k meets the target and at
/// k-1 misses it, both judged on the point estimate.
struct SimCheck {
    SimEstimate at_k;
    std::optional<SimEstimate> at_k_minus_1;
    bool confirms_k = false;
    bool rejects_k_minus_1 = false;
};

inline SimCheck verify_by_simulation(long k, double target_wait, double rho, double mu, double beta,
                                     const SetupPolicy& policy, const SimSearchOptions& opt = {})
{
    SimCheck c;
    c.at_k = simulated_wait(SystemParams::from_load(k, rho, mu, beta), policy, opt, opt.fine_replications);
    c.confirms_k = c.at_k.mean <= target_wait;
    if (k > 1) {
        c.at_k_minus_1
            = simulated_wait(SystemParams::from_load(k - 1, rho, mu, beta), policy, opt, opt.fine_replications);
        c.rejects_k_minus_1 = c.at_k_minus_1->mean > target_wait;
    } else {
        c.rejects_k_minus_1 = true;
    }
    return c;
}

// Table ----------------------------------------------------------------------------

struct TableRow {
    std::string model;
    long k = 0; ///< -1 when the target is unachievable under this model
    double predicted_wait = 0.0;
    std::string note;
};

struct TableOptions {
    std::vector<WaitModel> models{WaitModel::DetApprox, WaitModel::LowR, WaitModel::UpperBound, WaitModel::ErlangC};
    bool exponential_sim = true;
    SimSearchOptions sim;
    long k_max = 10'000'000;
};

/// One row per model, sorted by k (unachievable rows last). A model that
/// cannot meet the target gets a row with k = -1 instead of failing the table.
inline std::vector<TableRow> provisioning_table(double target_wait, double rho, double mu, double beta,
                                                const TableOptions& opt = {})
{
    if (!(target_wait > 0.0))
        throw error(errc::InvalidArgument, "target wait must be positive");
    validate(SystemParams{1, rho, mu, beta});

    std::vector<TableRow> rows;
    for (auto m : opt.models) {
        TableRow row;
        row.model = std::string(to_string(m));
        try {
            const auto r = min_servers_for_wait(target_wait, rho, mu, beta, m, opt.k_max);
            row.k = r.k;
            row.predicted_wait = r.predicted_wait;
            if (r.non_monotone)
                row.note = "NonMonotonePredictor";
        } catch (const error& e) {
            if (e.code() != errc::Unachievable)
                throw;
            row.k = -1;
            row.predicted_wait = std::numeric_limits<double>::quiet_NaN();
            row.note = "Unachievable";
        }
        rows.push_back(row);
    }
    if (opt.exponential_sim) {
        const auto r = min_servers_by_simulation(target_wait, rho, mu, beta, exponential_policy, opt.sim);
        rows.push_back({"exp-sim", r.k, r.wait.mean, "ci " + std::to_string(r.wait.ci_half_width)});
    }
    std::stable_sort(rows.begin(), rows.end(), [](const TableRow& a, const TableRow& b) {
        const long ka = a.k < 0 ? std::numeric_limits<long>::max() : a.k;
        const long kb = b.k < 0 ? std::numeric_limits<long>::max() : b.k;
        return ka < kb;
    });
    return rows;
}

} // namespace setupq::provision
