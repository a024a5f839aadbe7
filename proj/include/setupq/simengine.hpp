#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "setupq/errors.hpp"
#include "setupq/model.hpp"
#include "setupq/rng.hpp"

namespace setupq::sim {

enum class EventKind { Arrival, Departure, SetupComplete, SetupCancel, ServerOff };

constexpr std::string_view to_string(EventKind kind)
{
    switch (kind) {
    case EventKind::Arrival: return "Arrival";
    case EventKind::Departure: return "Departure";
    case EventKind::SetupComplete: return "SetupComplete";
    case EventKind::SetupCancel: return "SetupCancel";
    case EventKind::ServerOff: return "ServerOff";
    }
    return "Unknown";
}

/// State after an event. n_idle counts servers that are on but not busy,
/// which only the m > 0 policies and NoSetup produce.
struct EventRecord {
    double time = 0.0;
    EventKind kind = EventKind::Arrival;
    long n_jobs = 0;
    long n_busy = 0;
    long n_setup = 0;
    long n_idle = 0;
    friend bool operator==(const EventRecord&, const EventRecord&) = default;
};

struct SimConfig {
    double horizon = 1e5;
    double warmup = 0.0;
    std::uint64_t seed = 1;
    std::uint64_t replication_index = 0;
    bool record_trace = false;
    std::uint64_t max_events = 20'000'000'000ull;
};

/// Warmup long enough to cover both the setup transient and queue relaxation.
inline double default_warmup(const SystemParams& p)
{
    return std::max(10.0 * p.beta, 100.0 / (p.mu * (1.0 - p.rho)));
}

struct SimState {
    double now = 0.0;
    long n_jobs = 0;
    long n_busy = 0;
    long n_setup = 0;
    long n_idle = 0;
    std::deque<double> setup_completions; ///< deterministic policy only, ascending
    std::uint64_t arrivals_seen = 0;
    std::uint64_t departures_seen = 0;
    double q_time_integral = 0.0;   ///< integral of Q over the measurement window
    double n_time_integral = 0.0;   ///< integral of N over the window
    double powered_integral = 0.0;  ///< integral of (on + setting up) over the window
    double wait_sum = 0.0;
    std::uint64_t wait_count = 0;

    long queue_length() const { return n_jobs - n_busy; }
    long n_on() const { return n_busy + n_idle; }
};

/// One sample path of the M/M/k with setup under a given policy.
///
/// Departures are a single exponential race at rate mu*Z, redrawn whenever Z
/// changes or a departure fires. Deterministic setups sit in a FIFO of
/// completion times; cancellation always removes the newest setup, so the
/// queue stays sorted. Exponential setups are a race at rate S/mean.
class Engine {
public:
    Engine(const SystemParams& params, const SetupPolicy& policy, std::uint64_t seed, std::uint64_t stream)
        : params_(validate(params))
        , rng_(seed, stream)
    {
        validate_policy(policy, params_);
        if (const auto* det = std::get_if<DeterministicSetup>(&policy)) {
            mode_ = Mode::Deterministic;
            buffer_ = det->buffer;
        } else if (const auto* ex = std::get_if<ExponentialSetup>(&policy)) {
            mode_ = Mode::Exponential;
            exp_setup_rate_ = 1.0 / ex->mean_setup;
        } else {
            mode_ = Mode::AlwaysOn;
            state_.n_idle = params_.k;
        }
        next_arrival_ = rng_.exponential(params_.total_arrival_rate);
    }

    /// Measurement window for time integrals and per-job waits (by arrival time).
    void set_window(double lo, double hi)
    {
        window_lo_ = lo;
        window_hi_ = hi;
    }

    void enable_trace(bool on) { trace_on_ = on; }
    const std::vector<EventRecord>& trace() const { return trace_; }
    std::vector<EventRecord> take_trace() { return std::move(trace_); }

    const SimState& state() const { return state_; }
    const SystemParams& params() const { return params_; }

    double next_time() const { return std::min({next_arrival_, next_departure_, next_setup_time()}); }

    /// A job that arrived before the window end is still waiting.
    bool waiting_in_window() const { return !queue_.empty() && queue_.front() < window_hi_; }

    EventKind step()
    {
        const double t_arr = next_arrival_;
        const double t_dep = next_departure_;
        const double t_set = next_setup_time();
        const double t = std::min({t_arr, t_dep, t_set});
        if (!std::isfinite(t))
            throw error(errc::NonFiniteTime, "next event time is not finite");

        integrate(state_.now, t);
        state_.now = t;

        const long busy_before = state_.n_busy;
        const long setup_before = state_.n_setup;
        EventKind kind;
        long cancels = 0;
        long offs = 0;

        if (t == t_arr) {
            kind = EventKind::Arrival;
            on_arrival();
        } else if (t == t_dep) {
            kind = EventKind::Departure;
            on_departure(cancels, offs);
        } else {
            kind = EventKind::SetupComplete;
            on_setup_complete();
        }

        if (kind == EventKind::Departure || state_.n_busy != busy_before)
            next_departure_ = t + rng_.exponential(params_.mu * static_cast<double>(state_.n_busy));
        if (mode_ == Mode::Exponential && state_.n_setup != setup_before)
            next_exp_setup_ = t + rng_.exponential(exp_setup_rate_ * static_cast<double>(state_.n_setup));

        if (trace_on_) {
            record(kind);
            if (cancels > 0)
                record(EventKind::SetupCancel);
            if (offs > 0)
                record(EventKind::ServerOff);
        }
        return kind;
    }

private:
    enum class Mode { Deterministic, Exponential, AlwaysOn };

    double next_setup_time() const
    {
        if (mode_ == Mode::Deterministic)
            return state_.setup_completions.empty() ? inf_ : state_.setup_completions.front();
        if (mode_ == Mode::Exponential)
            return state_.n_setup > 0 ? next_exp_setup_ : inf_;
        return inf_;
    }

    long target_powered() const { return std::min(params_.k, state_.n_jobs + buffer_); }

    void integrate(double from, double to)
    {
        const double a = std::max(from, window_lo_);
        const double b = std::min(to, window_hi_);
        if (b > a) {
            const double dt = b - a;
            state_.q_time_integral += static_cast<double>(state_.queue_length()) * dt;
            state_.n_time_integral += static_cast<double>(state_.n_jobs) * dt;
            state_.powered_integral += static_cast<double>(state_.n_on() + state_.n_setup) * dt;
        }
    }

    void start_service()
    {
        const double arrived = queue_.front();
        queue_.pop_front();
        if (arrived >= window_lo_ && arrived < window_hi_) {
            state_.wait_sum += state_.now - arrived;
            ++state_.wait_count;
        }
    }

    void start_setup()
    {
        ++state_.n_setup;
        if (mode_ == Mode::Deterministic)
            state_.setup_completions.push_back(state_.now + params_.beta);
    }

    void on_arrival()
    {
        ++state_.n_jobs;
        ++state_.arrivals_seen;
        queue_.push_back(state_.now);
        if (state_.n_idle > 0) {
            --state_.n_idle;
            ++state_.n_busy;
            start_service();
        }
        if (mode_ != Mode::AlwaysOn) {
            while (state_.n_on() + state_.n_setup < target_powered())
                start_setup();
        }
        next_arrival_ = state_.now + rng_.exponential(params_.total_arrival_rate);
    }

    void on_departure(long& cancels, long& offs)
    {
        --state_.n_jobs;
        ++state_.departures_seen;
        --state_.n_busy;
        if (state_.n_jobs > state_.n_busy) {
            ++state_.n_busy;
            start_service();
        } else {
            ++state_.n_idle;
        }
        if (mode_ == Mode::AlwaysOn)
            return;
        // setups in progress are canceled before any idle server turns off
        while (state_.n_on() + state_.n_setup > target_powered()) {
            if (state_.n_setup > 0) {
                --state_.n_setup;
                if (mode_ == Mode::Deterministic)
                    state_.setup_completions.pop_back();
                ++cancels;
            } else if (state_.n_idle > 0) {
                --state_.n_idle;
                ++offs;
            } else {
                break;
            }
        }
    }

    void on_setup_complete()
    {
        --state_.n_setup;
        if (mode_ == Mode::Deterministic)
            state_.setup_completions.pop_front();
        if (state_.n_jobs > state_.n_busy) {
            ++state_.n_busy;
            start_service();
        } else {
            ++state_.n_idle;
        }
    }

    void record(EventKind kind)
    {
        trace_.push_back({state_.now, kind, state_.n_jobs, state_.n_busy, state_.n_setup, state_.n_idle});
    }

    static constexpr double inf_ = std::numeric_limits<double>::infinity();

    SystemParams params_;
    RandomStream rng_;
    Mode mode_ = Mode::Deterministic;
    long buffer_ = 0;
    double exp_setup_rate_ = 0.0;

    SimState state_;
    std::deque<double> queue_; ///< arrival times of jobs waiting, FCFS
    double next_arrival_ = inf_;
    double next_departure_ = inf_;
    double next_exp_setup_ = inf_;
    double window_lo_ = 0.0;
    double window_hi_ = inf_;

    bool trace_on_ = false;
    std::vector<EventRecord> trace_;
};

// Steady-state replication ---------------------------------------------------

struct ReplicationResult {
    double mean_queue_length = 0.0; ///< time average of Q over [warmup, horizon]
    double mean_jobs = 0.0;         ///< time average of N over the window
    double mean_powered = 0.0;      ///< time average of servers on or in setup
    double mean_wait = 0.0;         ///< mean queueing delay of jobs arriving in the window
    std::uint64_t wait_samples = 0;
    double window_length = 0.0;
    std::uint64_t events = 0;
    SimState state_at_horizon;
    std::vector<EventRecord> trace;

    /// Arrival rate observed over the window (jobs that arrived in it).
    double window_arrival_rate() const
    {
        return window_length > 0.0 ? static_cast<double>(wait_samples) / window_length : 0.0;
    }
};

/// Simulates [0, horizon] from an empty system with all servers off. The path is
/// continued past the horizon only until every job that arrived in the window
/// has started service, so its wait is observed uncensored.
inline ReplicationResult run_replication(const SystemParams& params, const SetupPolicy& policy,
                                         const SimConfig& cfg)
{
    if (!(cfg.horizon > 0.0) || !(cfg.warmup >= 0.0) || !(cfg.warmup < cfg.horizon))
        throw error(errc::InvalidArgument, "need 0 <= warmup < horizon");
    if (cfg.max_events == 0)
        throw error(errc::InvalidArgument, "max_events must be positive");

    Engine engine(params, policy, cfg.seed, cfg.replication_index);
    engine.set_window(cfg.warmup, cfg.horizon);
    engine.enable_trace(cfg.record_trace);

    ReplicationResult out;
    bool past_horizon = false;
    std::uint64_t events = 0;
    for (;;) {
        const double t = engine.next_time();
        if (!past_horizon && t > cfg.horizon) {
            past_horizon = true;
            out.state_at_horizon = engine.state();
            out.state_at_horizon.now = cfg.horizon;
        }
        if (past_horizon && !engine.waiting_in_window())
            break;
        engine.step();
        if (++events > cfg.max_events)
            throw error(errc::EventCapExceeded, "exceeded " + std::to_string(cfg.max_events) + " events");
    }

    const SimState& s = engine.state();
    out.window_length = cfg.horizon - cfg.warmup;
    out.mean_queue_length = s.q_time_integral / out.window_length;
    out.mean_jobs = s.n_time_integral / out.window_length;
    out.mean_powered = s.powered_integral / out.window_length;
    out.wait_samples = s.wait_count;
    out.mean_wait = s.wait_count > 0 ? s.wait_sum / static_cast<double>(s.wait_count)
                                     : std::numeric_limits<double>::quiet_NaN();
    // integrals and waits are final once the window closes
    out.state_at_horizon.q_time_integral = s.q_time_integral;
    out.state_at_horizon.n_time_integral = s.n_time_integral;
    out.state_at_horizon.powered_integral = s.powered_integral;
    out.state_at_horizon.wait_sum = s.wait_sum;
    out.state_at_horizon.wait_count = s.wait_count;
    out.events = events;
    if (cfg.record_trace)
        out.trace = engine.take_trace();
    return out;
}

// Invariants -----------------------------------------------------------------

struct InvariantReport {
    bool ok = true;
    std::size_t first_bad_index = 0;
    EventRecord first_bad;
    std::string reason;
};

/// Checks every event epoch of a trace that starts from the empty, all-off
/// state. For the base policy this includes Z(t) = min(k, min N over the last
/// beta time units).
inline InvariantReport check_sample_path(std::span<const EventRecord> trace, const SystemParams& params,
                                         const SetupPolicy& policy)
{
    const long k = params.k;
    const bool is_det = std::holds_alternative<DeterministicSetup>(policy);
    const bool is_exp = std::holds_alternative<ExponentialSetup>(policy);
    const bool is_none = std::holds_alternative<NoSetup>(policy);
    const long m = buffer_of(policy);
    const double beta = params.beta;

    InvariantReport rep;
    auto fail = [&](std::size_t i, std::string why) {
        rep.ok = false;
        rep.first_bad_index = i;
        rep.first_bad = trace[i];
        rep.reason = std::move(why);
        return rep;
    };

    // sliding-window minimum of N over [t - beta, t]; `left` is the record in
    // effect at t - beta (-1 means the empty initial state, N = 0)
    std::deque<std::size_t> mins;
    long left = -1;
    bool seen_arrival = false;
    double last_time = -std::numeric_limits<double>::infinity();

    for (std::size_t i = 0; i < trace.size(); ++i) {
        const EventRecord& r = trace[i];
        if (r.time < last_time)
            return fail(i, "event times decrease");
        last_time = r.time;
        if (r.kind == EventKind::Arrival)
            seen_arrival = true;

        if (r.n_busy < 0 || r.n_setup < 0 || r.n_idle < 0 || r.n_jobs < 0)
            return fail(i, "negative count");
        if (r.n_busy > r.n_jobs)
            return fail(i, "more busy servers than jobs");
        if (r.n_setup > k - r.n_busy)
            return fail(i, "setup count exceeds k - busy");
        if (r.n_busy + r.n_idle + r.n_setup > k)
            return fail(i, "more than k servers powered");
        if (r.n_idle > 0 && r.n_jobs > r.n_busy)
            return fail(i, "idle server while jobs wait");

        if (is_none) {
            if (r.n_busy + r.n_idle != k || r.n_setup != 0)
                return fail(i, "always-on servers changed state");
            continue;
        }
        if (is_exp || (is_det && m == 0)) {
            if (r.n_idle != 0)
                return fail(i, "idle server under base policy");
            if (r.n_setup != std::min(k, r.n_jobs) - r.n_busy)
                return fail(i, "setup count != min(k, N) - Z");
        } else if (seen_arrival && r.n_busy + r.n_idle + r.n_setup != std::min(k, r.n_jobs + m)) {
            return fail(i, "powered servers != min(k, N + m)");
        }

        if (is_det && m == 0) {
            const double edge = r.time - beta;
            const double tol = 1e-9 * std::max(1.0, std::abs(r.time));
            while (left + 1 < static_cast<long>(i) + 1 && trace[static_cast<std::size_t>(left + 1)].time <= edge + tol)
                ++left;
            while (!mins.empty() && trace[mins.back()].n_jobs >= r.n_jobs)
                mins.pop_back();
            mins.push_back(i);
            while (!mins.empty() && static_cast<long>(mins.front()) < left)
                mins.pop_front();
            long window_min = mins.empty() ? r.n_jobs : trace[mins.front()].n_jobs;
            if (left < 0)
                window_min = 0;
            if (r.n_busy != std::min(k, window_min))
                return fail(i, "Z != min(k, min N over the last beta)");
        }
    }
    return rep;
}

/// Throwing form of check_sample_path.
inline bool assert_sample_path_invariants(std::span<const EventRecord> trace, const SystemParams& params,
                                          const SetupPolicy& policy)
{
    const auto rep = check_sample_path(trace, params, policy);
    if (!rep.ok)
        throw error(errc::InvariantViolation,
                    "event " + std::to_string(rep.first_bad_index) + " (" + std::string(to_string(rep.first_bad.kind))
                        + " at t=" + std::to_string(rep.first_bad.time) + "): " + rep.reason);
    return true;
}

// Renewal cycles -------------------------------------------------------------

/// Per-cycle measurements between consecutive moments the (r+1)-th server
/// turns off, r = ceil(R).
struct CycleStats {
    long threshold = 0;                        ///< r
    std::vector<double> length;                ///< X
    std::vector<double> accumulation_time;     ///< T_A, first time Z reaches r+1
    std::vector<double> excess_integral;       ///< integral of (N - R) over the cycle
    std::vector<double> queue_integral;        ///< integral of Q over the cycle
    std::vector<double> jobs_at_accumulation;  ///< N(T_A) - R
    std::vector<double> first_long_epoch;      ///< L
    std::uint64_t events = 0;
    std::uint64_t epochs_without_long = 0;     ///< cycles where no epoch reached beta (should stay 0)

    std::size_t size() const { return length.size(); }
};

inline CycleStats run_renewal_cycles(const SystemParams& params, const SimConfig& cfg, std::size_t n_cycles,
                                     double timeout_factor = 200.0)
{
    const SystemParams p = validate(params);
    if (p.offered_load < 2.0)
        throw error(errc::InvalidArgument, "renewal harness needs R >= 2");
    const long r = static_cast<long>(std::ceil(p.offered_load));
    if (r + 1 > p.k)
        throw error(errc::InvalidArgument, "need k >= ceil(R) + 1 for the renewal threshold");
    const double R = p.offered_load;
    const double timeout = timeout_factor * std::max(p.beta, 1.0 / p.mu) * std::sqrt(R);

    Engine engine(p, DeterministicSetup{0}, cfg.seed, cfg.replication_index);

    CycleStats out;
    out.threshold = r;
    out.length.reserve(n_cycles);

    bool in_cycle = false;
    double start = 0.0;
    double excess = 0.0;
    double queue_int = 0.0;
    double t_a = -1.0;
    double n_ta = 0.0;
    long epoch = 0;
    double epoch_start = 0.0;
    long first_long = -1;
    double warm_deadline = cfg.horizon > 0.0 ? std::max(cfg.horizon, timeout) : timeout;

    std::uint64_t events = 0;
    while (out.size() < n_cycles) {
        const SimState& s = engine.state();
        const double t = engine.next_time();
        const long z_before = s.n_busy;
        const long n_before = s.n_jobs;
        if (in_cycle) {
            const double dt = t - s.now;
            excess += (static_cast<double>(n_before) - R) * dt;
            queue_int += static_cast<double>(n_before - z_before) * dt;
        }
        engine.step();
        if (++events > cfg.max_events)
            throw error(errc::EventCapExceeded, "renewal run exceeded event cap");

        const long z_after = s.n_busy;
        const long n_after = s.n_jobs;

        if (in_cycle) {
            if (t - start > timeout)
                throw error(errc::CycleTimeout, "cycle exceeded " + std::to_string(timeout) + " time units");
            if (t_a < 0.0) {
                if (n_after < n_before && n_after <= r - (epoch + 1)) {
                    if (first_long < 0 && t - epoch_start >= p.beta)
                        first_long = epoch;
                    ++epoch;
                    epoch_start = t;
                }
                if (z_before == r && z_after == r + 1) {
                    t_a = t - start;
                    n_ta = static_cast<double>(n_after) - R;
                    if (first_long < 0 && t - epoch_start >= p.beta)
                        first_long = epoch;
                    if (first_long < 0) {
                        ++out.epochs_without_long;
                        first_long = epoch;
                    }
                }
            }
        } else if (t > warm_deadline) {
            throw error(errc::CycleTimeout, "no renewal observed during warm start");
        }

        if (z_before == r + 1 && z_after == r) {
            if (in_cycle) {
                out.length.push_back(t - start);
                out.accumulation_time.push_back(t_a);
                out.excess_integral.push_back(excess);
                out.queue_integral.push_back(queue_int);
                out.jobs_at_accumulation.push_back(n_ta);
                out.first_long_epoch.push_back(static_cast<double>(first_long));
            }
            in_cycle = true;
            start = t;
            excess = 0.0;
            queue_int = 0.0;
            t_a = -1.0;
            n_ta = 0.0;
            epoch = 0;
            epoch_start = t;
            first_long = -1;
        }
    }
    out.events = events;
    return out;
}

// Trace output ---------------------------------------------------------------

/// `time,kind,n_jobs,n_busy,n_setup`, times with 17 significant digits.
template <class Out>
void write_trace_csv(Out& os, std::span<const EventRecord> trace)
{
    char buf[64];
    for (const auto& r : trace) {
        std::snprintf(buf, sizeof buf, "%.17g", r.time);
        os << buf << ',' << to_string(r.kind) << ',' << r.n_jobs << ',' << r.n_busy << ',' << r.n_setup << '\n';
    }
}

} // namespace setupq::sim
