#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "setupq/oracles.hpp"

using namespace setupq;
using namespace setupq::oracles;

namespace {

SystemParams ref_point() { return SystemParams::from_load(250, 0.4, 1.0, 100.0); }

const sim::CycleStats& ref_cycles()
{
    static const sim::CycleStats cycles = collect_cycles(ref_point(), 2000, 99, 1);
    return cycles;
}

} // namespace

TEST(Verdict, OneSidedConservatism)
{
    const auto le = make_verdict("x", Relation::AtMost, 1.0, 0.2, 1.1);
    EXPECT_FALSE(le.passed);
    EXPECT_NEAR(le.slack, -0.1, 1e-15);
    const auto ge = make_verdict("y", Relation::AtLeast, 1.0, 0.2, 0.7);
    EXPECT_TRUE(ge.passed);
    EXPECT_NEAR(ge.slack, 0.1, 1e-15);
}

TEST(Cycles, ShardedCollectionIsDeterministic)
{
    const auto a = collect_cycles(ref_point(), 64, 5, 1);
    const auto b = collect_cycles(ref_point(), 64, 5, 2);
    ASSERT_EQ(a.size(), 64u);
    EXPECT_EQ(a.accumulation_time, b.accumulation_time);
    EXPECT_EQ(a.first_long_epoch, b.first_long_epoch);
}

TEST(AccumulationTime, PassesAtReferencePoint)
{
    const auto v = check_accumulation_time(ref_point(), ref_cycles());
    EXPECT_TRUE(v.asserted);
    EXPECT_TRUE(v.passed) << v.estimate << " + " << v.ci << " vs " << v.bound;
    EXPECT_GE(v.estimate, ref_point().beta);
}

TEST(AccumulationTime, ForgedBoundBelowBetaFails)
{
    const auto v = check_accumulation_time(ref_point(), ref_cycles(), 0.9);
    EXPECT_FALSE(v.passed);
}

TEST(AccumulationTime, LargerSetup)
{
    const auto p = SystemParams::from_load(250, 0.4, 1.0, 1000.0);
    const auto v = check_accumulation_time(p, 200, 3, 1);
    EXPECT_TRUE(v.passed) << v.estimate << " + " << v.ci << " vs " << v.bound;
}

TEST(FirstLongEpoch, PassesAtReferencePoint)
{
    const auto v = check_first_long_epoch(ref_point(), ref_cycles());
    EXPECT_TRUE(v.passed) << v.estimate << " - " << v.ci << " vs " << v.bound;
    EXPECT_NEAR(v.bound, 0.8 * (2.0 / 3.0) * std::sqrt(M_PI / 2.0) * 10.0, 1e-12);
    EXPECT_GT(v.estimate, 8.3);
}

TEST(FirstLongEpoch, BoundScalesWithSqrtLoad)
{
    const auto a = check_first_long_epoch(ref_point(), ref_cycles());
    const auto p4 = SystemParams::from_load(1000, 0.4, 1.0, 100.0);
    const auto b = check_first_long_epoch(p4, ref_cycles());
    EXPECT_NEAR(b.bound / a.bound, 2.0, 1e-12);
}

TEST(FirstLongEpoch, OutOfRegionNotAsserted)
{
    const auto p = SystemParams::from_load(250, 0.4, 1.0, 1.0);
    const auto v = check_first_long_epoch(p, 200, 1, 1);
    EXPECT_FALSE(v.asserted);
    EXPECT_NE(v.note.find("not asserted"), std::string::npos);
}

TEST(Nta, BothMomentsPass)
{
    const auto vs = check_nta(ref_point(), ref_cycles());
    ASSERT_EQ(vs.size(), 2u);
    for (const auto& v : vs)
        EXPECT_TRUE(v.passed) << v.claim_id << ' ' << v.estimate << " vs " << v.bound;
    EXPECT_GE(vs[0].estimate, 0.0);
    EXPECT_NEAR(vs[0].bound, 2.9 * 100.0 * 10.0, 1e-9);
}

TEST(HittingTails, SandwichAtModerateSampleSize)
{
    const double grid[] = {0.05, 0.2, 1.0};
    const auto vs = check_hitting_tails(50.0, 1.0, grid, 400000, 8, 1);
    for (const auto& v : vs)
        if (v.asserted) {
            EXPECT_TRUE(v.passed) << v.claim_id << ' ' << v.estimate << " vs " << v.bound;
        }
}

TEST(HittingTails, SmallNuSkipped)
{
    const double grid[] = {0.01};
    const auto vs = check_hitting_tails(50.0, 1.0, grid, 1000, 8, 1);
    ASSERT_EQ(vs.size(), 1u);
    EXPECT_FALSE(vs[0].asserted);
    EXPECT_NE(vs[0].note.find("HypothesisViolated"), std::string::npos);
}

TEST(HittingTails, MonteCarloAgreesWithExactTail)
{
    const auto samples = sample_critical_busy_many(50.0, 1.0, 400000, 12, 1);
    std::size_t survive = 0;
    for (double x : samples)
        survive += x >= 1.0 ? 1 : 0;
    const double p = static_cast<double>(survive) / samples.size();
    const double se = std::sqrt(p * (1 - p) / samples.size());
    EXPECT_NEAR(p, exact_critical_busy_tail(100.0), 4.0 * se);
}

// Discrete walk with up-probability p: P(gamma <= 2T+1) from simulation vs the
// partial sum of the Catalan pmf.
TEST(Catalan, PartialSumMatchesWalkSimulation)
{
    const double p = 0.4;
    const long T = 10;
    RandomStream rng(2, 2);
    const int trials = 400000;
    int hit = 0;
    for (int t = 0; t < trials; ++t) {
        long pos = 1;
        for (long step = 0; step < 2 * T + 1 && pos > 0; ++step)
            pos += rng.uniform() < p ? 1 : -1;
        hit += pos == 0 ? 1 : 0;
    }
    double cdf = 0.0;
    for (long l = 0; l <= T; ++l)
        cdf += analytic::catalan_hitting_pmf(p, l);
    const double est = static_cast<double>(hit) / trials;
    EXPECT_NEAR(est, cdf, 4.0 * std::sqrt(cdf * (1 - cdf) / trials));
}

TEST(Catalan, SumsToOne)
{
    const double ps[] = {0.05, 0.25, 0.4, 0.5};
    for (const auto& v : check_catalan_sum(ps))
        EXPECT_TRUE(v.passed) << v.claim_id << ' ' << v.estimate;
}

TEST(StoppedBusy, PassesAndHasPower)
{
    const auto v = check_stopped_busy(100.0, 100.0, 1.0, 500000, 4, 1);
    EXPECT_TRUE(v.asserted);
    EXPECT_TRUE(v.passed) << v.estimate << " + " << v.ci << " vs " << v.bound;
    EXPECT_NEAR(v.estimate, exact_stopped_busy_mean(100.0, 100.0), 2.5 * v.ci);

    analytic::BoundConstants halved;
    halved.b1 /= 2.0;
    const auto w = check_stopped_busy(100.0, 100.0, 1.0, 500000, 4, 1, halved);
    EXPECT_FALSE(w.passed);
}

TEST(StoppedBusy, LongerSetupExact)
{
    EXPECT_LE(exact_stopped_busy_mean(400.0, 100.0), analytic::stopped_busy_mean_upper(400.0, 100.0, 1.0));
    EXPECT_GT(exact_stopped_busy_mean(400.0, 100.0), exact_stopped_busy_mean(100.0, 100.0));
}

TEST(MMInfPassage, AllLevelsPass)
{
    const double rs[] = {100.0, 10000.0};
    const auto vs = check_mminf_passage(rs, 1.0);
    EXPECT_EQ(vs.size(), 110u);
    for (const auto& v : vs)
        EXPECT_TRUE(v.passed) << v.claim_id;
}

TEST(MMInfPassage, SmallLoadFlagged)
{
    const double rs[] = {4.0};
    const auto vs = check_mminf_passage(rs, 1.0);
    ASSERT_EQ(vs.size(), 2u);
    EXPECT_FALSE(vs[0].asserted);
    EXPECT_TRUE(vs[0].passed);
}

TEST(MPolicy, AllBuffersAboveBound)
{
    const long ms[] = {0, 1, 5, 10};
    sim::SimConfig cfg;
    cfg.seed = 3;
    cfg.warmup = 1000;
    cfg.horizon = 1000 + 1e4;
    const auto rep = check_mpolicy_bound(ref_point(), ms, cfg, 3, 1);
    ASSERT_EQ(rep.verdicts.size(), 4u);
    for (const auto& v : rep.verdicts)
        EXPECT_TRUE(v.passed) << v.claim_id;
    EXPECT_EQ(rep.curve[0].wait_reduction, 0.0);
    EXPECT_LT(rep.curve[2].wait_reduction, 0.5);
}

TEST(MPolicy, ZeroBufferMatchesBase)
{
    const long ms[] = {0};
    sim::SimConfig cfg;
    cfg.seed = 3;
    cfg.warmup = 500;
    cfg.horizon = 3000;
    const auto rep = check_mpolicy_bound(ref_point(), ms, cfg, 2, 1);
    const auto base = estimate(ref_point(), SetupPolicy{}, cfg, 2, 1);
    EXPECT_EQ(rep.curve[0].queue, base.queue);
}

TEST(Manifest, Format)
{
    std::vector<OracleVerdict> vs{make_verdict("a", Relation::AtMost, 0.5, 0.0, 1.0)};
    std::ostringstream os;
    write_manifest_csv(os, vs);
    EXPECT_EQ(os.str(), "claim_id,relation,estimate,ci,bound,slack,passed,asserted,note\n"
                        "a,<=,0.5,0,1,0.5,true,true,\n");
}

TEST(Verify, SingleClaimAndUnknownClaim)
{
    VerifyOptions opt;
    opt.claims = {"catalan_sum"};
    const auto vs = run_verify(opt);
    EXPECT_EQ(vs.size(), 4u);
    EXPECT_TRUE(all_asserted_pass(vs));

    opt.claims = {"accumulation_time"};
    opt.budget = 0.02;
    opt.threads = 1;
    EXPECT_EQ(run_verify(opt).size(), 1u);

    opt.claims = {"no_such_claim"};
    EXPECT_THROW(run_verify(opt), error);
}
