#include "fixtures.hpp"

#include <doctest.h>

#include <algorithm>

using namespace stefan;
using fixtures::melt;
using fixtures::zinc;

namespace {

bool names(const ValidationReport& r, const std::string& assumption)
{
    return std::any_of(r.violations.begin(), r.violations.end(),
                       [&](const Violation& v) { return v.assumption == assumption; });
}

} // namespace

TEST_CASE("zinc melt setup is valid")
{
    const auto r = validate_initial(melt(), zinc(), Order::Second);
    CHECK(r.ok());
}

TEST_CASE("negative initial velocity violates Assumption 2")
{
    const auto r = validate_initial(melt(10.0, 0.1, -0.01), zinc(), Order::Second);
    REQUIRE(r.violations.size() == 1);
    CHECK(r.violations[0].assumption == "Assumption 2");
    CHECK(r.violations[0].value == doctest::Approx(-0.01));
}

TEST_CASE("boundary mismatch violates Assumption 1")
{
    const auto p = zinc();
    InitialData d = melt();
    d.profile = TabulatedProfile{{{0.0, p.t_melt + 5.0}, {0.05, p.t_melt + 3.0}, {0.1, p.t_melt + 1.0}}};
    const auto r = validate_initial(d, p, Order::Second);
    CHECK(names(r, "Assumption 1"));
    CHECK_FALSE(names(r, "Assumption 2"));
}

TEST_CASE("boundary tolerance absorbs rounding")
{
    const auto p = zinc();
    InitialData d = melt();
    d.profile = TabulatedProfile{{{0.0, p.t_melt + 5.0}, {0.1, p.t_melt + 1e-12}}};
    CHECK(validate_initial(d, p, Order::Second).ok());
}

TEST_CASE("interface outside the slab violates Assumption 1")
{
    CHECK(names(validate_initial(melt(10.0, 0.6), zinc(), Order::Second), "Assumption 1"));
    CHECK(names(validate_initial(melt(10.0, 0.0), zinc(), Order::Second), "Assumption 1"));
}

TEST_CASE("sub-melting samples violate Assumption 1")
{
    const auto p = zinc();
    InitialData d = melt();
    d.profile = TabulatedProfile{{{0.0, p.t_melt + 2.0}, {0.05, p.t_melt - 1.0}, {0.1, p.t_melt}}};
    CHECK(names(validate_initial(d, p, Order::Second), "Assumption 1"));
    CHECK(names(validate_initial(melt(-1.0), p, Order::Second), "Assumption 1"));
}

TEST_CASE("third order needs a0 satisfying Assumption 5")
{
    const auto p = fixtures::zinc3();
    InitialData d = melt(10.0, 0.1, 0.001);
    CHECK(names(validate_initial(d, p, Order::Third), "Assumption 5"));
    d.a0 = -0.001 / p.eps - 1e-6;
    CHECK(names(validate_initial(d, p, Order::Third), "Assumption 5"));
    d.a0 = -0.001 / p.eps;
    CHECK(validate_initial(d, p, Order::Third).ok());
}

TEST_CASE("malformed inputs are errors, not violations")
{
    const auto p = zinc();
    InitialData d = melt();
    d.profile = TabulatedProfile{};
    CHECK_THROWS_AS(validate_initial(d, p, Order::Second), ValidationError);
    d = melt(std::nan(""));
    CHECK_THROWS_AS(validate_initial(d, p, Order::Second), ValidationError);
    d = melt();
    d.profile = TabulatedProfile{{{0.0, p.t_melt + 1.0}, {0.08, p.t_melt}}};
    CHECK_THROWS_AS(validate_initial(d, p, Order::Second), ValidationError);
    d.profile = TabulatedProfile{{{0.05, p.t_melt + 1.0}, {0.0, p.t_melt + 2.0}, {0.1, p.t_melt}}};
    CHECK_THROWS_AS(validate_initial(d, p, Order::Second), ValidationError);
}

TEST_CASE("relaxation times must match the order")
{
    auto p = zinc();
    CHECK_THROWS_AS(p.validate(Order::Third), ValidationError);
    p.eps = 0.0;
    CHECK_THROWS_AS(p.validate(Order::Second), ValidationError);
    CHECK_THROWS_AS(fixtures::zinc3(10.0, 0.0).validate(Order::Third), ValidationError);
    CHECK_THROWS_AS(fixtures::zinc3().validate(Order::Second), ValidationError);
}

TEST_CASE("validation is a pure predicate")
{
    const auto d = melt(10.0, 0.1, -1.0);
    const auto a = validate_initial(d, zinc(), Order::Second);
    const auto b = validate_initial(d, zinc(), Order::Second);
    REQUIRE(a.violations.size() == b.violations.size());
    for (std::size_t i = 0; i < a.violations.size(); ++i) {
        CHECK(a.violations[i].assumption == b.violations[i].assumption);
        CHECK(a.violations[i].value == b.violations[i].value);
    }
}

TEST_CASE("minimum setpoint with no stored energy is s0")
{
    CHECK(min_setpoint_2nd(melt(0.0), zinc()) == 0.1);
    CHECK(min_setpoint_3rd(melt(0.0), fixtures::zinc3(), 0.1, 0.4) == 0.1);
}

TEST_CASE("minimum setpoint for a linear profile matches its closed form")
{
    const auto p = zinc();
    const auto d = melt(10.0, 0.1, 0.002);
    const double expected = 0.1 + p.eps * 0.002 + p.beta / p.alpha * 10.0 * 0.1 / 2.0;
    CHECK(min_setpoint_2nd(d, p) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("zinc setup leaves room below the 0.2 m setpoint")
{
    const auto p = zinc();
    const auto d = melt();
    const double integral = fixtures::fine_trapezoid([&](double x) { return d.temperature(x, p) - p.t_melt; }, 0.0,
                                                     d.s0, 10 * 128);
    const double oracle = d.s0 + p.eps * d.v0 + p.beta / p.alpha * integral;
    const double got = min_setpoint_2nd(d, p);
    CHECK(got == doctest::Approx(oracle).epsilon(1e-12));
    CHECK(got < 0.2);
    CHECK(got == doctest::Approx(0.1017394).epsilon(1e-6));
}

TEST_CASE("third-order minimum setpoint")
{
    const auto p = fixtures::zinc3(10.0, 30.0);
    const auto d = melt(10.0, 0.1, 0.001);
    SUBCASE("equal gains reduce to the second-order bound with the same relaxation")
    {
        CHECK(min_setpoint_3rd(d, p, 0.3, 0.3) == doctest::Approx(min_setpoint_2nd(d, p)).epsilon(1e-15));
    }
    SUBCASE("gain ratio two doubles the energy term")
    {
        const double integral =
            fixtures::fine_trapezoid([&](double x) { return d.temperature(x, p) - p.t_melt; }, 0.0, d.s0, 1000);
        const double oracle = d.s0 + 2.0 * (p.eps * d.v0 + p.beta / p.alpha * integral);
        CHECK(min_setpoint_3rd(d, p, 0.1, 0.2) == doctest::Approx(oracle).epsilon(1e-12));
    }
    SUBCASE("relaxation switch")
    {
        const double e = p.beta / p.alpha * 10.0 * 0.1 / 2.0;
        CHECK(min_setpoint_3rd(d, p, 0.1, 0.1, SetpointRelaxation::Eps2) ==
              doctest::Approx(0.1 + 30.0 * 0.001 + e).epsilon(1e-14));
        CHECK(min_setpoint_3rd(d, p, 0.1, 0.1, SetpointRelaxation::Sum) ==
              doctest::Approx(0.1 + 40.0 * 0.001 + e).epsilon(1e-14));
    }
    SUBCASE("gain precondition")
    {
        CHECK_THROWS_AS(min_setpoint_3rd(d, p, 0.2, 0.1), ValidationError);
        CHECK_THROWS_AS(min_setpoint_3rd(d, p, 0.0, 0.1), ValidationError);
    }
}

TEST_CASE("minimum setpoint is at least s0 and monotone in v0, surplus and eps")
{
    for (int trial = 0; trial < 200; ++trial) {
        const double s0 = fixtures::uniform(0.01, 0.4);
        const double v0 = fixtures::uniform(0.0, 1e-3);
        const double surplus = fixtures::uniform(0.0, 50.0);
        const double eps = fixtures::uniform(0.1, 50.0);
        const auto p = zinc(eps);
        const double base = min_setpoint_2nd(melt(surplus, s0, v0), p);
        CHECK(base >= s0);
        CHECK(min_setpoint_2nd(melt(surplus, s0, v0 * 1.5 + 1e-6), p) >= base);
        CHECK(min_setpoint_2nd(melt(surplus * 1.5 + 0.1, s0, v0), p) >= base);
        CHECK(min_setpoint_2nd(melt(surplus, s0, v0), zinc(eps * 1.5)) >= base);
    }
}

TEST_CASE("tabulating a linear profile barely moves the minimum setpoint")
{
    const auto p = zinc();
    for (double surplus : {1.0, 10.0, 100.0}) {
        const auto d = melt(surplus);
        InitialData t = d;
        t.profile = tabulate(std::get<LinearProfile>(d.profile), d.s0, p.t_melt, 64);
        CHECK(validate_initial(t, p, Order::Second).ok());
        const double a = min_setpoint_2nd(d, p);
        const double b = min_setpoint_2nd(t, p);
        CHECK(std::abs(a - b) / a < 1e-6);
    }
}

TEST_CASE("trapezoid rule")
{
    const std::vector<double> v{0.0, 1.0, 4.0, 9.0, 16.0};
    CHECK(trapezoid(v, 0.5) == doctest::Approx(0.5 * (0.0 / 2 + 1 + 4 + 9 + 16.0 / 2)));
    CHECK(trapezoid(std::vector<double>{3.0}, 1.0) == 0.0);
    std::vector<double> lin(101);
    for (int i = 0; i <= 100; ++i) {
        lin[i] = 2.0 + 3.0 * i * 0.01;
    }
    CHECK(trapezoid(lin, 0.01) == doctest::Approx(2.0 + 1.5).epsilon(1e-14));
}

TEST_CASE("initial state and reference error")
{
    const auto p = zinc();
    const auto d = melt(10.0, 0.1, 0.001);
    const auto st = initial_state(d, p, 64, Order::Second);
    REQUIRE(st.nx() == 64);
    CHECK(st.temp.back() == p.t_melt);
    CHECK(st.temp.front() == doctest::Approx(p.t_melt + 10.0));
    CHECK(st.xi(32) == 0.5);
    CHECK(st.dx() == doctest::Approx(0.1 / 64));
    CHECK_FALSE(st.s_ddot);
    CHECK(surplus_integral(st, p) == doctest::Approx(0.5).epsilon(1e-12));

    const auto e = reference_error(st, p, 0.2);
    REQUIRE(e.X.size() == 2);
    CHECK(e.X(0) == doctest::Approx(-0.1));
    CHECK(e.X(1) == 0.001);
    CHECK(std::all_of(e.u.begin(), e.u.end(), [](double u) { return u >= 0.0; }));

    InitialData d3 = d;
    d3.a0 = 1e-5;
    const auto st3 = initial_state(d3, fixtures::zinc3(), 32, Order::Third);
    REQUIRE(st3.s_ddot);
    const auto e3 = reference_error(st3, fixtures::zinc3(), 0.2);
    REQUIRE(e3.X.size() == 3);
    CHECK(e3.X(2) == 1e-5);
}
