#include <gtest/gtest.h>

#include <cmath>

#include "setupq/model.hpp"

using namespace setupq;

namespace {

errc code_of(auto&& fn)
{
    try {
        fn();
    } catch (const error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return errc::InvalidArgument;
}

} // namespace

TEST(Validate, DerivedQuantities)
{
    const auto p = SystemParams::from_load(10, 0.5, 1.0, 100.0);
    EXPECT_DOUBLE_EQ(p.offered_load, 5.0);
    EXPECT_DOUBLE_EQ(p.total_arrival_rate, 5.0);
    EXPECT_DOUBLE_EQ(p.lambda, 0.5);
}

TEST(Validate, RejectsUnstableLoad)
{
    EXPECT_EQ(code_of([] { SystemParams::from_load(10, 1.0, 1.0, 100.0); }), errc::UnstableLoad);
    EXPECT_EQ(code_of([] { SystemParams::from_load(10, 0.0, 1.0, 100.0); }), errc::UnstableLoad);
}

TEST(Validate, ErrorPrecedence)
{
    EXPECT_EQ(code_of([] { validate(SystemParams{0, 2.0, -1.0, -1.0}); }), errc::NonPositiveRate);
    EXPECT_EQ(code_of([] { validate(SystemParams{0, 2.0, 1.0, -1.0}); }), errc::ZeroServers);
    EXPECT_EQ(code_of([] { validate(SystemParams{1, 2.0, 1.0, -1.0}); }), errc::UnstableLoad);
    EXPECT_EQ(code_of([] { validate(SystemParams{1, 0.5, 1.0, -1.0}); }), errc::NegativeSetup);
}

TEST(Validate, BoundaryOfRegionIsInside)
{
    const auto p = SystemParams::from_load(200, 0.5, 1.0, 1000.0);
    EXPECT_DOUBLE_EQ(p.offered_load, 100.0);
    EXPECT_TRUE(in_assumption_region(p));
}

TEST(Region, Examples)
{
    EXPECT_TRUE(in_assumption_region(SystemParams::from_load(250, 0.4, 1.0, 100.0)));
    EXPECT_FALSE(in_assumption_region(SystemParams::from_load(10, 0.5, 1.0, 1000.0)));
    EXPECT_FALSE(in_assumption_region(SystemParams::from_load(1000, 0.5, 1.0, 50.0)));
    AssumptionRegion loose{1.0, 1.0};
    EXPECT_TRUE(in_assumption_region(SystemParams::from_load(10, 0.5, 1.0, 10.0), loose));
}

TEST(Validate, RoundTripThroughArrivalRate)
{
    for (long k : {1L, 7L, 250L, 10000L})
        for (double rho : {0.013, 0.4, 0.77, 0.999})
            for (double mu : {0.001, 1.0, 37.5}) {
                const auto a = SystemParams::from_load(k, rho, mu, 3.0);
                const auto b = SystemParams::from_arrival_rate(k, a.total_arrival_rate, mu, 3.0);
                EXPECT_NEAR(b.rho, a.rho, 4e-16 * a.rho);
                EXPECT_NEAR(b.offered_load, a.offered_load, 1e-15 * a.offered_load);
                EXPECT_NEAR(b.total_arrival_rate, a.total_arrival_rate, 1e-15 * a.total_arrival_rate);
                EXPECT_NEAR(a.lambda / a.mu, rho, 1e-15);
            }
}

TEST(Validate, Idempotent)
{
    const auto p = SystemParams::from_load(33, 0.61, 2.5, 17.0);
    EXPECT_EQ(validate(p), p);
    EXPECT_EQ(validate(validate(p)), p);
}

TEST(Policy, Validation)
{
    const auto p = SystemParams::from_load(10, 0.5, 1.0, 1.0);
    EXPECT_NO_THROW(validate_policy(DeterministicSetup{10}, p));
    EXPECT_EQ(code_of([&] { validate_policy(DeterministicSetup{11}, p); }), errc::InvalidPolicy);
    EXPECT_EQ(code_of([&] { validate_policy(DeterministicSetup{-1}, p); }), errc::InvalidPolicy);
    EXPECT_EQ(code_of([&] { validate_policy(ExponentialSetup{0.0}, p); }), errc::InvalidPolicy);
    EXPECT_NO_THROW(validate_policy(NoSetup{}, p));
}

TEST(Policy, Names)
{
    EXPECT_EQ(policy_name(DeterministicSetup{}), "deterministic");
    EXPECT_EQ(policy_name(DeterministicSetup{3}), "deterministic(m=3)");
    EXPECT_EQ(policy_name(ExponentialSetup{2.0}), "exponential");
    EXPECT_EQ(policy_name(NoSetup{}), "none");
    EXPECT_EQ(buffer_of(DeterministicSetup{4}), 4);
    EXPECT_EQ(buffer_of(NoSetup{}), 0);
}

TEST(Errors, MessageCarriesCode)
{
    try {
        SystemParams::from_load(10, 1.5, 1.0, 0.0);
        FAIL();
    } catch (const error& e) {
        EXPECT_NE(std::string(e.what()).find("UnstableLoad"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("rho"), std::string::npos);
    }
}
