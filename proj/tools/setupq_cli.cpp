// setupq: bounds, simulation, sweeps, provisioning and claim verification for
// the M/M/k queue with deterministic setup times.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <yaml-cpp/yaml.h>

#include "setupq/analytic.hpp"
#include "setupq/estimate.hpp"
#include "setupq/model.hpp"
#include "setupq/oracles.hpp"
#include "setupq/provision.hpp"
#include "setupq/simengine.hpp"

namespace {

using setupq::oracles::format_real;

constexpr int exit_ok = 0;
constexpr int exit_assert = 1;
constexpr int exit_usage = 2;

struct usage_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

const char* yes_no(bool b) { return b ? "true" : "false"; }

// bounds ------------------------------------------------------------------------

struct BoundsArgs {
    long k = 0;
    double rho = 0.0;
    double mu = 1.0;
    double beta = 0.0;
    std::string csv;
    setupq::analytic::BoundConstants constants;
};

void write_bounds(std::ostream& os, const setupq::SystemParams& p, const setupq::analytic::BoundsReport& r)
{
    os << "k,rho,mu,beta,q_approx,q_upper,q_lower,q_low_r,t_approx,t_upper,t_lower,erlang_c_wait,"
          "tightness_ratio,in_region,lower_available,lower_clamped\n";
    os << p.k << ',' << format_real(p.rho) << ',' << format_real(p.mu) << ',' << format_real(p.beta) << ','
       << format_real(r.q_approx) << ',' << format_real(r.q_upper) << ',' << format_real(r.q_lower) << ','
       << format_real(r.q_low_r) << ',' << format_real(r.t_approx) << ',' << format_real(r.t_upper) << ','
       << format_real(r.t_lower) << ',' << format_real(r.erlang_c_wait) << ',' << format_real(r.tightness_ratio)
       << ',' << yes_no(r.in_region) << ',' << yes_no(r.lower_available) << ',' << yes_no(r.lower_clamped) << '\n';
}

int cmd_bounds(const BoundsArgs& a)
{
    const auto p = setupq::SystemParams::from_load(a.k, a.rho, a.mu, a.beta);
    if (!a.constants.valid())
        throw usage_error("constant overrides must be positive with L1 < C_apx");
    const auto r = setupq::analytic::bounds_report(p, a.constants);
    write_bounds(std::cout, p, r);
    if (!a.csv.empty()) {
        std::ofstream f(a.csv);
        if (!f)
            throw usage_error("cannot open " + a.csv);
        write_bounds(f, p, r);
    }
    return exit_ok;
}

// simulate ----------------------------------------------------------------------

struct SimArgs {
    long k = 0;
    double rho = 0.0;
    double mu = 1.0;
    double beta = 0.0;
    std::string policy = "det";
    long buffer = 0;
    double exp_mean = -1.0;
    double horizon = 1e5;
    double warmup = -1.0;
    std::uint64_t seed = 1;
    std::size_t replications = 4;
    unsigned threads = 0;
    std::string trace;
};

setupq::SetupPolicy parse_policy(const std::string& name, long buffer, double exp_mean)
{
    if (name == "det" || name == "deterministic")
        return setupq::DeterministicSetup{buffer};
    if (name == "exp" || name == "exponential")
        return setupq::ExponentialSetup{exp_mean};
    if (name == "none")
        return setupq::NoSetup{};
    throw usage_error("unknown policy '" + name + "' (det, exp, none)");
}

int cmd_simulate(const SimArgs& a)
{
    const auto p = setupq::SystemParams::from_load(a.k, a.rho, a.mu, a.beta);
    const auto policy = parse_policy(a.policy, a.buffer, a.exp_mean > 0.0 ? a.exp_mean : std::max(a.beta, 1e-12));
    setupq::validate_policy(policy, p);

    setupq::sim::SimConfig cfg;
    cfg.seed = a.seed;
    cfg.horizon = a.horizon;
    cfg.warmup = a.warmup >= 0.0 ? a.warmup : std::min(setupq::sim::default_warmup(p), 0.5 * a.horizon);

    if (!a.trace.empty()) {
        auto one = cfg;
        one.record_trace = true;
        const auto r = setupq::sim::run_replication(p, policy, one);
        const auto tmp = a.trace + ".tmp";
        {
            std::ofstream f(tmp);
            if (!f)
                throw usage_error("cannot open " + a.trace);
            f << "time,kind,n_jobs,n_busy,n_setup\n";
            setupq::sim::write_trace_csv(f, r.trace);
        }
        std::filesystem::rename(tmp, a.trace);
    }

    const auto est = setupq::estimate(p, policy, cfg, a.replications, a.threads);
    std::cout << "policy,k,rho,mu,beta,mean_q,ci_q,mean_wait,ci,mean_powered,little_consistent,events,seed,"
                 "replications\n";
    std::cout << setupq::policy_name(policy) << ',' << p.k << ',' << format_real(p.rho) << ',' << format_real(p.mu)
              << ',' << format_real(p.beta) << ',' << format_real(est.queue.mean) << ','
              << format_real(est.queue.ci_half_width) << ',' << format_real(est.wait.mean) << ','
              << format_real(est.wait.ci_half_width) << ',' << format_real(est.mean_powered) << ','
              << yes_no(est.little_consistent) << ',' << est.queue.total_events << ',' << a.seed << ','
              << a.replications << '\n';
    return exit_ok;
}

// sweep ---------------------------------------------------------------------------

/// Sweep spec, YAML, format_version 1:
///
///   format_version: 1
///   sweep: k                       # k | rho | beta | m
///   values: [1, 2, 5, 10]
///   base: {k: 100, rho: 0.5, mu: 1.0, beta: 200, m: 0}
///   policies: [deterministic, exponential, none]
///   sim: {replications: 4, horizon: 100000, warmup: auto, seed: 1}
///   output: fig1.csv               # optional; --out overrides
struct SweepSpec {
    std::string axis;
    std::vector<double> values;
    long k = 1;
    double rho = 0.5;
    double mu = 1.0;
    double beta = 0.0;
    long m = 0;
    std::vector<std::string> policies;
    std::size_t replications = 4;
    double horizon = 1e5;
    double warmup = -1.0; ///< negative = default warmup
    std::uint64_t seed = 1;
    std::string output;
};

SweepSpec load_sweep_spec(const std::string& path)
{
    YAML::Node doc;
    try {
        doc = YAML::LoadFile(path);
    } catch (const YAML::Exception& e) {
        throw usage_error("cannot parse sweep spec " + path + ": " + e.what());
    }
    auto need = [&](const YAML::Node& n, const char* key) {
        if (!n[key])
            throw usage_error(std::string("sweep spec is missing '") + key + "'");
        return n[key];
    };
    SweepSpec s;
    try {
        if (need(doc, "format_version").as<int>() != 1)
            throw usage_error("unsupported format_version (expected 1)");
        s.axis = need(doc, "sweep").as<std::string>();
        if (s.axis != "k" && s.axis != "rho" && s.axis != "beta" && s.axis != "m")
            throw usage_error("sweep axis must be one of k, rho, beta, m");
        s.values = need(doc, "values").as<std::vector<double>>();
        if (s.values.empty())
            throw usage_error("sweep grid is empty");
        const auto base = need(doc, "base");
        if (base["k"])
            s.k = base["k"].as<long>();
        if (base["rho"])
            s.rho = base["rho"].as<double>();
        if (base["mu"])
            s.mu = base["mu"].as<double>();
        if (base["beta"])
            s.beta = base["beta"].as<double>();
        if (base["m"])
            s.m = base["m"].as<long>();
        s.policies = need(doc, "policies").as<std::vector<std::string>>();
        if (s.policies.empty())
            throw usage_error("policy list is empty");
        if (const auto sim = doc["sim"]) {
            if (sim["replications"])
                s.replications = sim["replications"].as<std::size_t>();
            if (sim["horizon"])
                s.horizon = sim["horizon"].as<double>();
            if (sim["warmup"] && sim["warmup"].as<std::string>() != "auto")
                s.warmup = sim["warmup"].as<double>();
            if (sim["seed"])
                s.seed = sim["seed"].as<std::uint64_t>();
        }
        if (doc["output"])
            s.output = doc["output"].as<std::string>();
    } catch (const YAML::Exception& e) {
        throw usage_error("malformed sweep spec " + path + ": " + e.what());
    }
    for (const auto& pol : s.policies)
        if (pol != "deterministic" && pol != "exponential" && pol != "none")
            throw usage_error("unknown policy '" + pol + "' in sweep spec");
    if (s.replications < 2)
        throw usage_error("sim.replications must be at least 2");
    return s;
}

void run_sweep(const SweepSpec& s, std::ostream& os, unsigned threads)
{
    os << "sweep_var,value,policy,mean_wait,ci,mean_q,ci_q,q_approx,q_upper,q_lower,q_low_r,in_region,seed,"
          "replications\n";
    for (double v : s.values) {
        long k = s.k;
        double rho = s.rho;
        double beta = s.beta;
        long m = s.m;
        if (s.axis == "k")
            k = std::lround(v);
        else if (s.axis == "rho")
            rho = v;
        else if (s.axis == "beta")
            beta = v;
        else
            m = std::lround(v);
        const auto p = setupq::SystemParams::from_load(k, rho, s.mu, beta);
        const auto b = setupq::analytic::bounds_report(p);

        setupq::sim::SimConfig cfg;
        cfg.seed = s.seed;
        cfg.warmup = s.warmup >= 0.0 ? s.warmup : setupq::sim::default_warmup(p);
        cfg.horizon = cfg.warmup + s.horizon;

        for (const auto& name : s.policies) {
            setupq::SetupPolicy policy = setupq::NoSetup{};
            if (name == "deterministic")
                policy = setupq::DeterministicSetup{m};
            else if (name == "exponential" && beta > 0.0)
                policy = setupq::ExponentialSetup{beta};
            const auto est = setupq::estimate(p, policy, cfg, s.replications, threads);
            os << s.axis << ',' << format_real(v) << ',' << name << ',' << format_real(est.wait.mean) << ','
               << format_real(est.wait.ci_half_width) << ',' << format_real(est.queue.mean) << ','
               << format_real(est.queue.ci_half_width) << ',' << format_real(b.q_approx) << ','
               << format_real(b.q_upper) << ',' << format_real(b.q_lower) << ',' << format_real(b.q_low_r) << ','
               << yes_no(b.in_region) << ',' << s.seed << ',' << s.replications << '\n';
        }
    }
}

int cmd_sweep(const std::string& spec_path, std::string out, unsigned threads)
{
    const auto spec = load_sweep_spec(spec_path);
    if (out.empty())
        out = spec.output;
    if (out.empty() || out == "-") {
        std::ostringstream buf;
        run_sweep(spec, buf, threads);
        std::cout << buf.str();
        return exit_ok;
    }
    const std::string tmp = out + ".tmp";
    try {
        {
            std::ofstream f(tmp);
            if (!f)
                throw usage_error("cannot open " + out);
            run_sweep(spec, f, threads);
            if (!f)
                throw usage_error("write failed for " + out);
        }
        std::filesystem::rename(tmp, out);
    } catch (...) {
        std::error_code ec;
        std::filesystem::remove(tmp, ec);
        throw;
    }
    return exit_ok;
}

// provision ---------------------------------------------------------------------

struct ProvisionArgs {
    double target = 0.0;
    double rho = 0.5;
    double mu = 1.0;
    double beta = 0.0;
    std::string model = "all";
    long k_max = 10'000'000;
    std::uint64_t seed = 17;
    unsigned threads = 0;
};

int cmd_provision(const ProvisionArgs& a)
{
    if (!(a.target > 0.0))
        throw usage_error("--target must be positive");
    setupq::provision::TableOptions opt;
    opt.k_max = a.k_max;
    opt.sim.seed = a.seed;
    opt.sim.threads = a.threads;
    if (a.model == "exp-sim") {
        opt.models.clear();
    } else if (a.model != "all") {
        const auto m = setupq::provision::parse_wait_model(a.model);
        if (!m)
            throw usage_error("unknown model '" + a.model
                              + "' (all, det-approx, low-r, upper-bound, erlang-c, exp-sim)");
        opt.models = {*m};
        opt.exponential_sim = false;
    }
    const auto rows = setupq::provision::provisioning_table(a.target, a.rho, a.mu, a.beta, opt);
    std::cout << "model,k,predicted_wait,note\n";
    for (const auto& r : rows)
        std::cout << r.model << ',' << r.k << ',' << format_real(r.predicted_wait) << ',' << r.note << '\n';
    return exit_ok;
}

// verify --------------------------------------------------------------------------

struct VerifyArgs {
    std::string claims;
    std::uint64_t seed = 20240601;
    double budget = 1.0;
    double slack = -1.0;
    unsigned threads = 0;
    std::string out;
};

int cmd_verify(const VerifyArgs& a)
{
    setupq::oracles::VerifyOptions opt;
    std::stringstream ss(a.claims);
    for (std::string item; std::getline(ss, item, ',');)
        if (!item.empty())
            opt.claims.push_back(item);
    opt.seed = a.seed;
    opt.budget = a.budget;
    opt.slack = a.slack;
    opt.threads = a.threads;

    const auto verdicts = setupq::oracles::run_verify(opt);
    if (a.out.empty()) {
        setupq::oracles::write_manifest_csv(std::cout, verdicts);
    } else {
        const auto tmp = a.out + ".tmp";
        {
            std::ofstream f(tmp);
            if (!f)
                throw usage_error("cannot open " + a.out);
            setupq::oracles::write_manifest_csv(f, verdicts);
        }
        std::filesystem::rename(tmp, a.out);
    }
    int rc = exit_ok;
    for (const auto& v : verdicts)
        if (v.asserted && !v.passed) {
            std::cerr << "FAILED: " << v.claim_id << " (estimate " << format_real(v.estimate) << ", bound "
                      << format_real(v.bound) << ")\n";
            rc = exit_assert;
        }
    return rc;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"M/M/k with setup times: bounds, simulation, provisioning, claim checks"};
    app.require_subcommand(1);

    BoundsArgs bounds;
    auto* b = app.add_subcommand("bounds", "closed-form approximation and bounds");
    b->add_option("--k", bounds.k, "servers")->required();
    b->add_option("--rho", bounds.rho, "per-server load")->required();
    b->add_option("--mu", bounds.mu, "service rate");
    b->add_option("--beta", bounds.beta, "setup time")->required();
    b->add_option("--csv", bounds.csv, "also write the row to this file");
    b->add_option("--c-apx", bounds.constants.C_apx, "approximation constant");
    b->add_option("--l1", bounds.constants.L1, "first-long-epoch constant");
    b->add_option("--f1", bounds.constants.F1);
    b->add_option("--d1", bounds.constants.D1);
    b->add_option("--d2", bounds.constants.D2);
    b->add_option("--d3", bounds.constants.D3);

    SimArgs sim;
    auto* s = app.add_subcommand("simulate", "independent-replication estimate of E[Q] and E[T_Q]");
    s->add_option("--k", sim.k)->required();
    s->add_option("--rho", sim.rho)->required();
    s->add_option("--mu", sim.mu);
    s->add_option("--beta", sim.beta);
    s->add_option("--policy", sim.policy, "det | exp | none");
    s->add_option("--buffer", sim.buffer, "m for the deterministic policy");
    s->add_option("--exp-mean", sim.exp_mean, "mean exponential setup (default beta)");
    s->add_option("--horizon", sim.horizon);
    s->add_option("--warmup", sim.warmup);
    s->add_option("--seed", sim.seed);
    s->add_option("--replications", sim.replications);
    s->add_option("--threads", sim.threads, "0 = SETUPQ_THREADS or hardware");
    s->add_option("--trace", sim.trace, "write replication 0's event trace as CSV");

    std::string sweep_spec;
    std::string sweep_out;
    unsigned sweep_threads = 0;
    auto* w = app.add_subcommand("sweep", "parameter sweep from a YAML spec");
    w->add_option("spec", sweep_spec, "sweep spec file")->required();
    w->add_option("--out", sweep_out, "CSV path ('-' for stdout)");
    w->add_option("--threads", sweep_threads);

    ProvisionArgs prov;
    auto* pv = app.add_subcommand("provision", "minimum servers for a target mean wait");
    pv->add_option("--target", prov.target, "target mean queueing delay")->required();
    pv->add_option("--rho", prov.rho);
    pv->add_option("--mu", prov.mu);
    pv->add_option("--beta", prov.beta);
    pv->add_option("--model", prov.model, "all | det-approx | low-r | upper-bound | erlang-c | exp-sim");
    pv->add_option("--k-max", prov.k_max);
    pv->add_option("--seed", prov.seed);
    pv->add_option("--threads", prov.threads);

    VerifyArgs ver;
    auto* v = app.add_subcommand("verify", "check the supporting claims; exit 1 on a failed asserted claim");
    v->add_option("--claims", ver.claims, "comma-separated subset");
    v->add_option("--seed", ver.seed);
    v->add_option("--budget", ver.budget, "sample-count multiplier");
    v->add_option("--slack", ver.slack, "uniform relative slack for the cycle claims");
    v->add_option("--threads", ver.threads);
    v->add_option("--out", ver.out, "manifest CSV path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? exit_ok : exit_usage;
    }

    try {
        if (*b)
            return cmd_bounds(bounds);
        if (*s)
            return cmd_simulate(sim);
        if (*w)
            return cmd_sweep(sweep_spec, sweep_out, sweep_threads);
        if (*pv)
            return cmd_provision(prov);
        if (*v)
            return cmd_verify(ver);
    } catch (const setupq::error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_usage;
    }
    return exit_usage;
}
