// Acceptance run: one PASS/FAIL line per criterion, exit 1 if any fails.
// Tolerances and regression pins are fixed here; seeds are fixed, so a rerun
// on the same build reproduces every number.

#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "setupq/analytic.hpp"
#include "setupq/estimate.hpp"
#include "setupq/oracles.hpp"
#include "setupq/provision.hpp"
#include "setupq/simengine.hpp"

using namespace setupq;

namespace {

// Pinned values ---------------------------------------------------------------

constexpr double welch_rel_tol = 0.02;
constexpr double sandwich_ci_frac = 0.05;
constexpr double approx_rel_tol = 0.10; // 0.25 before the first run; observed 0.023, 0.010
constexpr double low_r_rel_tol = 0.30;
constexpr double fig1_min_factor = 2.0;
constexpr double fig1_pinned_factor = 4.972; // Det/Exp wait at k = 100
constexpr double fig1_factor_band = 0.15;  // relative band around the pin
constexpr double mpolicy_max_reduction = 0.15; // wait reduction m = 0 -> 5; observed 0.079
constexpr double tightness_ceiling = 13.0; // observed max 12.73

// ------------------------------------------------------------------------------

int failures = 0;

void report(int id, const char* name, bool pass, const std::string& detail)
{
    std::printf("%s %2d %-22s %s\n", pass ? "PASS" : "FAIL", id, name, detail.c_str());
    std::fflush(stdout);
    if (!pass)
        ++failures;
}

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...)
{
    char buf[1024];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

void run(int id, const char* name, const std::function<std::pair<bool, std::string>()>& body)
{
    const auto t0 = std::chrono::steady_clock::now();
    std::pair<bool, std::string> r;
    try {
        r = body();
    } catch (const std::exception& e) {
        r = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report(id, name, r.first, r.second + fmt(" [%.0fs]", secs));
}

sim::SimConfig window(const SystemParams& p, double length, std::uint64_t seed)
{
    sim::SimConfig c;
    c.warmup = sim::default_warmup(p);
    c.horizon = c.warmup + length;
    c.seed = seed;
    return c;
}

const SystemParams ref = SystemParams::from_load(250, 0.4, 1.0, 100.0);

EstimatePair ref_estimate()
{
    static const EstimatePair e = estimate(ref, DeterministicSetup{0}, window(ref, 5e4, 404), 10);
    return e;
}

std::string slurp(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int shell(const std::string& cmd) { return std::system(cmd.c_str()); }

} // namespace

int main()
{
    std::printf("threads: %u\n", default_thread_count());

    run(1, "welch-single-server", [] {
        const auto p = SystemParams::from_load(1, 0.5, 1.0, 10.0);
        const auto e = estimate(p, DeterministicSetup{0}, window(p, 1e6, 101), 20).wait;
        const double exact = analytic::welch_mm1_setup_wait(0.5, 1.0, 10.0);
        const double dev = std::abs(e.mean - exact);
        const bool pass = dev <= 3.0 * e.std_error() && dev <= welch_rel_tol * exact;
        return std::pair{pass, fmt("sim %.5f +- %.5f (se %.5f) exact %.5f rel %.4f", e.mean, e.ci_half_width,
                                   e.std_error(), exact, dev / exact)};
    });

    run(2, "erlang-c-baseline", [] {
        const auto p = SystemParams::from_load(10, 0.8, 1.0, 0.0);
        const auto e = estimate(p, NoSetup{}, window(p, 2e5, 102), 20).wait;
        const double exact = analytic::erlang_c_wait(10, 0.8, 1.0);
        const double dev = std::abs(e.mean - exact);
        return std::pair{dev <= 3.0 * e.std_error(),
                         fmt("sim %.5f (se %.5f) erlang-c %.5f", e.mean, e.std_error(), exact)};
    });

    run(3, "tiny-setup-degeneracy", [] {
        const auto p = SystemParams::from_load(10, 0.8, 1.0, 1e-6);
        const auto e = estimate(p, DeterministicSetup{0}, window(p, 2e5, 103), 20).wait;
        const double exact = analytic::erlang_c_wait(10, 0.8, 1.0);
        const double dev = std::abs(e.mean - exact);
        return std::pair{dev <= 3.0 * e.std_error(),
                         fmt("sim %.5f (se %.5f) erlang-c %.5f", e.mean, e.std_error(), exact)};
    });

    run(4, "sandwich", [] {
        const auto& q = ref_estimate().queue;
        const double lo = analytic::q_lower(ref), hi = analytic::q_upper(ref);
        const bool pass = lo <= q.mean && q.mean <= hi && q.ci_half_width <= sandwich_ci_frac * q.mean;
        return std::pair{pass, fmt("q_lower %.2f <= sim %.2f +- %.2f (%.2f%%) <= q_upper %.2f", lo, q.mean,
                                   q.ci_half_width, 100.0 * q.ci_half_width / q.mean, hi)};
    });

    run(5, "approximation-accuracy", [] {
        const auto p2 = SystemParams::from_load(400, 0.5, 1.0, 100.0);
        const auto q2 = estimate(p2, DeterministicSetup{0}, window(p2, 5e4, 405), 10).queue;
        const double e1 = relative_error(ref_estimate().queue, analytic::q_approx(ref));
        const double e2 = relative_error(q2, analytic::q_approx(p2));
        return std::pair{e1 <= approx_rel_tol && e2 <= approx_rel_tol,
                         fmt("(250,.4,100) sim %.2f approx %.2f rel %.4f; (400,.5,100) sim %.2f approx %.2f rel %.4f",
                             ref_estimate().queue.mean, analytic::q_approx(ref), e1, q2.mean,
                             analytic::q_approx(p2), e2)};
    });

    run(6, "low-r-regime", [] {
        const auto p = SystemParams::from_load(5, 0.1, 1.0, 200.0);
        const auto q = estimate(p, DeterministicSetup{0}, window(p, 1e6, 106), 20).queue;
        const double low = analytic::q_low_r(p), apx = analytic::q_approx(p);
        const double e_low = std::abs(low - q.mean) / q.mean, e_apx = std::abs(apx - q.mean) / q.mean;
        return std::pair{e_low <= low_r_rel_tol && e_low < e_apx,
                         fmt("sim %.4f +- %.4f low-r %.4f (rel %.4f) approx %.4f (rel %.4f)", q.mean,
                             q.ci_half_width, low, e_low, apx, e_apx)};
    });

    run(7, "det-vs-exp-separation", [] {
        std::string detail;
        double factor_100 = 0.0;
        for (long k : {2L, 10L, 50L, 100L}) {
            const auto p = SystemParams::from_load(k, 0.5, 1.0, 200.0);
            const auto cfg = window(p, 2e5, 107);
            const double det = estimate(p, DeterministicSetup{0}, cfg, 4).wait.mean;
            const double ex = estimate(p, ExponentialSetup{200.0}, cfg, 4).wait.mean;
            detail += fmt("k=%ld det %.3f exp %.3f x%.3f; ", k, det, ex, det / ex);
            if (k == 100)
                factor_100 = det / ex;
        }
        const bool pinned = std::abs(factor_100 / fig1_pinned_factor - 1.0) <= fig1_factor_band;
        return std::pair{factor_100 >= fig1_min_factor && pinned,
                         detail + fmt("pin %.3f", fig1_pinned_factor)};
    });

    run(8, "provisioning", [] {
        const auto det = provision::min_servers_for_wait(20.0, 0.5, 1.0, 1000.0, provision::WaitModel::DetApprox);
        const auto ex = provision::min_servers_by_simulation(20.0, 0.5, 1.0, 1000.0, provision::exponential_policy);
        const bool pass = det.k >= 1500 && det.k <= 2600 && ex.k >= 30 && ex.k <= 100;
        return std::pair{pass, fmt("det-approx k=%ld (wait %.3f); exp-sim k=%ld (wait %.3f +- %.3f, %ld probes)",
                                   det.k, det.predicted_wait, ex.k, ex.wait.mean, ex.wait.ci_half_width,
                                   ex.probes)};
    });

    run(9, "renewal-lemmas", [] {
        const auto cycles = oracles::collect_cycles(ref, 10000, 909);
        const auto ta = oracles::check_accumulation_time(ref, cycles);
        const auto el = oracles::check_first_long_epoch(ref, cycles);
        const auto nta = oracles::check_nta(ref, cycles).front();
        std::string d;
        for (const auto* v : {&ta, &el, &nta})
            d += fmt("%s %.3f +- %.3f vs %.3f; ", v->claim_id.c_str(), v->estimate, v->ci, v->bound);
        return std::pair{ta.passed && el.passed && nta.passed, d};
    });

    run(10, "analytic-claims", [] {
        const double rs[] = {100.0, 400.0, 1e4};
        const double ps[] = {0.1, 0.3, 0.45, 0.5};
        const double ts[] = {0.05, 0.2, 1.0, 5.0};
        auto vs = oracles::check_mminf_passage(rs, 1.0);
        const auto cs = oracles::check_catalan_sum(ps);
        const auto hs = oracles::check_hitting_tails(50.0, 1.0, ts, 10'000'000, 1010);
        vs.insert(vs.end(), cs.begin(), cs.end());
        vs.insert(vs.end(), hs.begin(), hs.end());
        std::size_t asserted = 0;
        double worst = std::numeric_limits<double>::infinity();
        std::string worst_id;
        for (const auto& v : vs)
            if (v.asserted) {
                ++asserted;
                if (v.slack < worst) {
                    worst = v.slack;
                    worst_id = v.claim_id;
                }
            }
        return std::pair{oracles::all_asserted_pass(vs),
                         fmt("%zu asserted checks; smallest slack %.3g at '%s'", asserted, worst, worst_id.c_str())};
    });

    run(11, "m-policy", [] {
        const long ms[] = {0, 1, 5, 10};
        const auto rep = oracles::check_mpolicy_bound(ref, ms, window(ref, 2e4, 1111), 4);
        const auto cfg = window(ref, 2e3, 1112);
        auto traced = cfg;
        traced.record_trace = true;
        const auto a = sim::run_replication(ref, DeterministicSetup{0}, traced);
        const auto b = sim::run_replication(ref, SetupPolicy{}, traced);
        const bool same_path = a.trace == b.trace && !a.trace.empty();
        std::string d;
        for (std::size_t i = 0; i < rep.curve.size(); ++i)
            d += fmt("m=%ld Q %.1f-%.1f vs %.2f; ", rep.curve[i].m, rep.curve[i].queue.mean,
                     rep.curve[i].queue.ci_half_width, rep.verdicts[i].bound);
        const double red = rep.curve[2].wait_reduction;
        d += fmt("reduction(5) %.4f cap %.3f; m=0 path %s", red, mpolicy_max_reduction,
                 same_path ? "identical" : "differs");
        return std::pair{oracles::all_asserted_pass(rep.verdicts) && same_path && red <= mpolicy_max_reduction, d};
    });

    run(12, "tightness-ceiling", [] {
        double worst = 0.0;
        int points = 0;
        bool finite = true;
        for (long k : {150L, 250L, 1000L})
            for (double rho : {0.3, 0.6})
                for (double beta : {100.0, 1000.0}) {
                    const auto p = SystemParams::from_load(k, rho, 1.0, beta);
                    if (p.offered_load < 100.0)
                        continue;
                    const double r = analytic::q_upper(p) / analytic::q_lower(p);
                    finite = finite && std::isfinite(r) && r > 0.0;
                    worst = std::max(worst, r);
                    ++points;
                }
        return std::pair{finite && worst <= tightness_ceiling,
                         fmt("%d points with R >= 100; max ratio %.4f ceiling %.4g", points, worst,
                             tightness_ceiling)};
    });

    run(13, "determinism", [] {
        namespace fs = std::filesystem;
        const fs::path dir = fs::temp_directory_path() / ("setupq-accept-" + std::to_string(::getpid()));
        fs::create_directories(dir);
        {
            std::ofstream spec(dir / "spec.yaml");
            spec << "format_version: 1\nsweep: k\nvalues: [2, 10, 50]\n"
                    "base: {rho: 0.5, mu: 1.0, beta: 20}\npolicies: [deterministic, exponential, none]\n"
                    "sim: {replications: 3, horizon: 5000, warmup: auto, seed: 13}\n";
        }
        const std::string cli = SETUPQ_CLI;
        const std::string d = dir.string();
        int rc = 0;
        rc |= shell(cli + " sweep " + d + "/spec.yaml --out " + d + "/a.csv --threads 1");
        rc |= shell(cli + " sweep " + d + "/spec.yaml --out " + d + "/b.csv --threads 2");
        rc |= shell(cli + " verify --claims catalan_sum,mminf_passage --out " + d + "/v1.csv > /dev/null");
        rc |= shell(cli + " verify --claims catalan_sum,mminf_passage --out " + d + "/v2.csv > /dev/null");
        const std::string a = slurp(dir / "a.csv"), b = slurp(dir / "b.csv");
        const std::string v1 = slurp(dir / "v1.csv"), v2 = slurp(dir / "v2.csv");
        const bool pass = rc == 0 && !a.empty() && a == b && !v1.empty() && v1 == v2;
        const auto rows = std::count(a.begin(), a.end(), '\n');
        fs::remove_all(dir);
        return std::pair{pass, fmt("sweep %ld lines, %s; verify manifest %s", static_cast<long>(rows),
                                   a == b ? "byte-identical across thread counts" : "DIFFERS",
                                   v1 == v2 ? "byte-identical" : "DIFFERS")};
    });

    std::printf("%s: %d criteria failed\n", failures ? "FAILED" : "OK", failures);
    return failures ? 1 : 0;
}
