#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <numeric>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "setupq/errors.hpp"
#include "setupq/model.hpp"
#include "setupq/simengine.hpp"

namespace setupq {

enum class Quantity {
    MeanQueueLength,
    MeanWait,
    MeanCycleLength,
    MeanAccumulationTime,
    MeanFirstLongEpoch,
    MeanNTA,
};

constexpr std::string_view to_string(Quantity q)
{
    switch (q) {
    case Quantity::MeanQueueLength: return "MeanQueueLength";
    case Quantity::MeanWait: return "MeanWait";
    case Quantity::MeanCycleLength: return "MeanCycleLength";
    case Quantity::MeanAccumulationTime: return "MeanAccumulationTime";
    case Quantity::MeanFirstLongEpoch: return "MeanFirstLongEpoch";
    case Quantity::MeanNTA: return "MeanNTA";
    }
    return "Unknown";
}

struct SimEstimate {
    double mean = 0.0;
    double ci_half_width = 0.0; ///< 95%, Student-t on replication means
    std::size_t n_replications = 0;
    std::uint64_t total_events = 0;
    Quantity quantity = Quantity::MeanQueueLength;

    double upper() const { return mean + ci_half_width; }
    double lower() const { return mean - ci_half_width; }
    double std_error() const;
    friend bool operator==(const SimEstimate&, const SimEstimate&) = default;
};

/// Two-sided 95% Student-t quantile for the given degrees of freedom.
inline double t_quantile_95(std::size_t dof)
{
    if (dof == 0)
        throw error(errc::InsufficientReplications, "need at least 2 samples for an interval");
    boost::math::students_t dist(static_cast<double>(dof));
    return boost::math::quantile(dist, 0.975);
}

inline double SimEstimate::std_error() const
{
    return n_replications >= 2 ? ci_half_width / t_quantile_95(n_replications - 1) : 0.0;
}

/// Sample mean and t-interval of i.i.d. samples. Values are summed in sorted
/// order, so any permutation of the input gives a bitwise-identical result.
inline SimEstimate summarize(std::span<const double> samples, Quantity quantity, std::uint64_t events = 0)
{
    const std::size_t n = samples.size();
    if (n < 2)
        throw error(errc::InsufficientReplications, "need at least 2 samples, got " + std::to_string(n));
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    double mean = 0.0;
    for (double x : sorted)
        mean += x;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double x : sorted)
        ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));

    SimEstimate e;
    e.mean = mean;
    e.ci_half_width = t_quantile_95(n - 1) * sd / std::sqrt(static_cast<double>(n));
    e.n_replications = n;
    e.total_events = events;
    e.quantity = quantity;
    return e;
}

inline double relative_error(const SimEstimate& estimate, double reference)
{
    if (!(reference > 0.0))
        throw error(errc::ZeroReference, "reference must be positive");
    return std::abs(estimate.mean - reference) / reference;
}

/// Thread cap: SETUPQ_THREADS if set and positive, else hardware concurrency.
inline unsigned default_thread_count()
{
    if (const char* env = std::getenv("SETUPQ_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && v > 0)
            return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Evaluates fn(i) for i in [0, n) on up to `threads` workers. Results land in
/// slot i, so the output never depends on scheduling. The first exception by
/// index is rethrown after all workers join.
template <class Fn>
auto parallel_indexed(std::size_t n, unsigned threads, Fn fn) -> std::vector<decltype(fn(std::size_t{}))>
{
    using T = decltype(fn(std::size_t{}));
    std::vector<T> out(n);
    std::vector<std::exception_ptr> errors(n);
    if (threads == 0)
        threads = default_thread_count();
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));

    auto work = [&](unsigned w) {
        for (std::size_t i = w; i < n; i += threads) {
            try {
                out[i] = fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (threads <= 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (unsigned w = 0; w < threads; ++w)
            pool.emplace_back(work, w);
        for (auto& t : pool)
            t.join();
    }
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
    return out;
}

struct EstimatePair {
    SimEstimate queue;
    SimEstimate wait;
    SimEstimate jobs;             ///< time-average N, for the E[N] = Lambda*E[T] check
    double mean_powered = 0.0;    ///< average servers on or in setup
    double arrival_rate = 0.0;    ///< Lambda
    double little_gap = 0.0;      ///< |E[Q] - Lambda*E[T_Q]|
    double little_tolerance = 0.0;
    bool little_consistent = true;
};

/// Independent replications r = 0..n-1 with replication_index = base + r.
/// Little's law is checked as a consistency flag rather than thrown, since a
/// short run can miss it by chance.
inline EstimatePair estimate(const SystemParams& params, const SetupPolicy& policy, const sim::SimConfig& base_cfg,
                             std::size_t n_replications, unsigned threads = 0)
{
    if (n_replications < 2)
        throw error(errc::InsufficientReplications, "need at least 2 replications");
    const SystemParams p = validate(params);
    validate_policy(policy, p);

    auto reps = parallel_indexed(n_replications, threads, [&](std::size_t r) {
        sim::SimConfig cfg = base_cfg;
        cfg.record_trace = false;
        cfg.replication_index = base_cfg.replication_index + r;
        return sim::run_replication(p, policy, cfg);
    });

    std::vector<double> q(n_replications), w(n_replications), n(n_replications);
    std::uint64_t events = 0;
    double powered = 0.0;
    for (std::size_t i = 0; i < n_replications; ++i) {
        q[i] = reps[i].mean_queue_length;
        w[i] = reps[i].mean_wait;
        n[i] = reps[i].mean_jobs;
        events += reps[i].events;
        powered += reps[i].mean_powered;
    }

    EstimatePair out;
    out.queue = summarize(q, Quantity::MeanQueueLength, events);
    out.wait = summarize(w, Quantity::MeanWait, events);
    out.jobs = summarize(n, Quantity::MeanQueueLength, events);
    out.mean_powered = powered / static_cast<double>(n_replications);
    out.arrival_rate = p.total_arrival_rate;
    out.little_gap = std::abs(out.queue.mean - p.total_arrival_rate * out.wait.mean);
    out.little_tolerance = out.queue.ci_half_width + p.total_arrival_rate * out.wait.ci_half_width;
    out.little_consistent = out.little_gap <= out.little_tolerance;
    return out;
}

} // namespace setupq
