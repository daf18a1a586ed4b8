#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "qlpair/characteristics.hpp"
#include "qlpair/kdv.hpp"

using namespace qlp;

namespace {

CoefficientPair pair_of(std::function<double(double, double)> a, std::function<double(double, double)> b) {
    return CoefficientPair(SpaceTimeFunction(std::move(a)), SpaceTimeFunction(std::move(b)));
}

KdvSolution soliton() { return KdvSolution::from_spec(KdvSpec::soliton(1.0)); }

double richardson_trace(const CoefficientPair& c, double t0, double x0, double t1, int n) {
    const double coarse = trace(c, t0, x0, t1, n);
    const double fine = trace(c, t0, x0, t1, 2 * n);
    return (16.0 * fine - coarse) / 15.0;
}

}  // namespace

TEST_CASE("trace with constant speed") {
    auto c = pair_of([](double, double) { return 1.75; }, [](double, double) { return 0.0; });
    CHECK(trace(c, 0.0, 0.3, 2.0, 7) == doctest::Approx(0.3 - 3.5).epsilon(1e-14));
    CHECK(trace(c, 2.0, 0.3, 0.0, 7) == doctest::Approx(0.3 + 3.5).epsilon(1e-14));
}

TEST_CASE("trace with linear speed") {
    SpaceTimeFunction a([](double, double x) { return x; });
    for (double x0 : {-3.0, 0.5, 10.0}) {
        CHECK(std::abs(trace(a, 0.0, x0, 1.0, 1000) - x0 * std::exp(-1.0)) < 1e-10);
    }
}

TEST_CASE("trace over the soliton matches a Richardson oracle") {
    auto c = soliton().speed(0.0);
    CoefficientPair pair(c, SpaceTimeFunction::constant(0.0));
    TraceOptions opt;
    for (double x0 : {-2.0, -0.3, 0.0, 1.1, 3.0}) {
        const double oracle = richardson_trace(pair, 0.0, x0, 1.0, 4000);
        CHECK(std::abs(trace(pair, 0.0, x0, 1.0, substeps_for(1.0, opt)) - oracle) < 1e-8);
    }
}

TEST_CASE("jacobian by formula and by differences") {
    SUBCASE("zero background translates rigidly") {
        auto sol = KdvSolution::from_spec(KdvSpec::zero());
        Grid g(-3, 3, 61, 0, 1, 5);
        auto table = characteristic_table(sol.flow_coefficients(0.8), g);
        auto check = compare_jacobians(table, 1e-10);
        for (double v : table.xi_x.values()) CHECK(v == doctest::Approx(1.0));
        CHECK(check.max_deviation < 1e-9);
        CHECK(table.xi(4, 30) == doctest::Approx(-3.2));
    }
    SUBCASE("q = x contracts at rate two") {
        KdvSolution lin([](double, double x, double& q, double& qx) { q = x; qx = 1.0; }, std::nullopt, "x");
        Grid g(-3, 3, 61, 0, 1, 6);
        auto table = characteristic_table(lin.flow_coefficients(-0.4), g);
        for (int i = 0; i < g.nt(); ++i) {
            const double expect = std::exp(-2.0 * g.t().at(i));
            for (int j = 0; j < g.nx(); j += 10) CHECK(table.xi_x(i, j) == doctest::Approx(expect).epsilon(1e-10));
        }
        CHECK(compare_jacobians(table, 1e-9).consistent);
    }
    SUBCASE("soliton") {
        Grid g(-8, 8, 1601, 0, 0.25, 11);
        REQUIRE(g.h() == doctest::Approx(0.01));
        auto table = characteristic_table(soliton().flow_coefficients(0.0), g);
        auto check = compare_jacobians(table, 1e-6);
        CHECK(check.max_deviation <= 1e-6);
        CHECK(check.consistent);
        for (double v : table.xi_x.values()) CHECK(v > 0.0);
    }
    SUBCASE("soliton over unit time: differences converge to the formula") {
        // characteristics ride with the soliton and the map stretches ~12x,
        // so the difference quotient needs refinement rather than h = 0.01
        auto dev = [](int nx) {
            Grid g(-8, 8, nx, 0, 1, 6);
            return compare_jacobians(characteristic_table(soliton().flow_coefficients(0.0), g), 1e-6).max_deviation;
        };
        const double coarse = dev(801);
        const double fine = dev(1601);
        CHECK(coarse / fine > 12.0);
    }
}

TEST_CASE("jacobian mismatch is flagged") {
    Grid g(-3, 3, 61, 0, 1, 3);
    auto table = characteristic_table(KdvSolution::from_spec(KdvSpec::zero()).flow_coefficients(0), g);
    table.xi_x(2, 5) = 2.0;
    CHECK_FALSE(compare_jacobians(table, 1e-6).consistent);
}

TEST_CASE("table csv") {
    Grid g(-1, 1, 16, 0, 1, 2);
    auto table = characteristic_table(KdvSolution::from_spec(KdvSpec::constant(1)).flow_coefficients(0), g);
    std::ostringstream out;
    write_csv(table, out);
    CHECK(out.str().rfind("t,x0,xi,xi_x\n", 0) == 0);
}

TEST_CASE("first-order solutions with closed forms") {
    Grid g(-5, 5, 101, 0, 1, 11);
    auto u0 = Profile([](double x) { return std::exp(-x * x); });
    SUBCASE("pure transport") {
        const double c = 0.9;
        auto u = solve_first_order(pair_of([c](double, double) { return c; }, [](double, double) { return 0.0; }),
                                   u0, g);
        for (int i = 0; i < g.nt(); ++i) {
            for (int j = 0; j < g.nx(); j += 7) {
                const double t = g.t().at(i);
                const double x = g.x().at(j);
                CHECK(u(i, j) == doctest::Approx(std::exp(-(x + c * t) * (x + c * t))).epsilon(1e-12));
            }
        }
    }
    SUBCASE("pure growth") {
        auto u = solve_first_order(
            pair_of([](double, double) { return 0.0; }, [](double t, double) { return std::cos(t); }), u0, g);
        for (int i = 0; i < g.nt(); ++i) {
            for (int j = 0; j < g.nx(); j += 7) {
                const double x = g.x().at(j);
                CHECK(u(i, j) == doctest::Approx(std::exp(-x * x) * std::exp(std::sin(g.t().at(i)))).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("kernel transport over the boosted soliton") {
    auto q = KdvSolution::from_spec(KdvSpec::boosted(KdvSpec::soliton(1.0), 1.0));
    Grid g(-6, 6, 241, 0, 0.5, 11);
    auto psi = solve_first_order(q.transport_coefficients(0.0), Profile([](double x) { return 1.0 / std::cosh(x); }), g);
    double err = 0.0;
    for (int i = 0; i < g.nt(); ++i) {
        for (int j = 0; j < g.nx(); ++j) {
            err = std::max(err, std::abs(psi(i, j) - 1.0 / std::cosh(g.x().at(j) + 2 * g.t().at(i))));
        }
    }
    CHECK(err <= 1e-6);
}

TEST_CASE("inhomogeneous solutions") {
    Grid g(-4, 4, 81, 0, 1, 6);
    auto s0 = Profile([](double x) { return std::sin(x); });
    SUBCASE("no source") {
        auto a = SpaceTimeFunction::constant(-0.5);
        auto s = solve_inhomogeneous(a, SpaceTimeFunction::constant(0.0), s0, g);
        CHECK(s(5, 40) == doctest::Approx(std::sin(0.0 - 0.5)).epsilon(1e-12));
    }
    SUBCASE("time-only source") {
        auto s = solve_inhomogeneous(SpaceTimeFunction::constant(0.0),
                                     SpaceTimeFunction([](double t, double) { return 2 * t; }), s0, g);
        for (int i = 0; i < g.nt(); ++i) {
            const double t = g.t().at(i);
            CHECK(s(i, 13) == doctest::Approx(std::sin(g.x().at(13)) + t * t).epsilon(1e-12));
        }
    }
    SUBCASE("soliton speed with a Gaussian source") {
        auto a = soliton().speed(0.0);
        SpaceTimeFunction eta([](double t, double x) { return std::exp(-(x - t) * (x - t)); });
        auto s = solve_inhomogeneous(a, eta, s0, g);
        TraceOptions fine;
        fine.max_step = 0.5e-3;
        auto s_fine = solve_inhomogeneous(a, eta, s0, g, fine);
        double err = 0.0;
        for (std::size_t k = 0; k < s.values().size(); ++k) {
            const double oracle = (16.0 * s_fine.values()[k] - s.values()[k]) / 15.0;
            err = std::max(err, std::abs(s.values()[k] - oracle));
        }
        CHECK(err <= 1e-7);
    }
}

TEST_CASE("semigroup, monotonicity and positivity") {
    std::mt19937 rng(424242);
    std::uniform_real_distribution<double> ut(0.0, 1.0);
    std::uniform_real_distribution<double> ux(-6.0, 6.0);
    auto q = KdvSolution::from_spec(KdvSpec::boosted(KdvSpec::soliton(1.2, 0.5), 0.3));
    auto pair = q.transport_coefficients(0.35);
    TraceOptions opt;
    for (int trial = 0; trial < 40; ++trial) {
        const double t0 = ut(rng);
        const double t1 = ut(rng);
        const double t2 = ut(rng);
        const double x = ux(rng);
        const double direct = trace(pair, t0, x, t2, substeps_for(t2 - t0, opt));
        const double mid = trace(pair, t0, x, t1, substeps_for(t1 - t0, opt));
        const double composed = trace(pair, t1, mid, t2, substeps_for(t2 - t1, opt));
        CHECK(std::abs(direct - composed) <= 2e-9);
    }
    Grid g(-6, 6, 121, 0, 1, 5);
    auto feet = trace_feet(pair, g);
    for (int i = 0; i < g.nt(); ++i) {
        for (int j = 1; j < g.nx(); ++j) CHECK(feet.foot(i, j) > feet.foot(i, j - 1));
    }
    auto u = solve_first_order(pair, Profile([](double x) { return 0.1 + std::exp(-x * x); }), g);
    for (double v : u.values()) CHECK(v > 0.0);
}

TEST_CASE("growth bound fits") {
    Region window{0.0, 1.0, -20.0, 20.0};
    SUBCASE("identity flow") {
        auto rep = check_growth_bounds(pair_of([](double, double) { return 0.0; }, [](double, double) { return 0.0; }),
                                       window, 10.0);
        CHECK(rep.pass);
        CHECK(rep.c1 == doctest::Approx(1.0));
        CHECK(rep.c2 == doctest::Approx(1.0));
    }
    SUBCASE("linear contraction") {
        auto rep = check_growth_bounds(pair_of([](double, double x) { return x; }, [](double, double) { return 0.0; }),
                                       window, 10.0);
        CHECK(rep.pass);
        CHECK(rep.c1 == doctest::Approx(std::exp(-1.0)).epsilon(1e-9));
        CHECK(rep.c2 == doctest::Approx(1.0));
    }
    SUBCASE("soliton speed") {
        auto rep = check_growth_bounds(soliton().transport_coefficients(0.0), window, 10.0);
        CHECK(rep.pass);
        CHECK(rep.c1 > 0.5);
        CHECK(rep.c2 < 2.0);
    }
}

TEST_CASE("superlinear speed is rejected") {
    Grid g(-5, 5, 51, 0, 0.1, 3);
    auto quad = pair_of([](double, double x) { return x * x; }, [](double, double) { return 0.0; });
    try {
        trace_feet(quad, g);
        FAIL("expected a growth error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Growth);
    }
    auto lin = pair_of([](double, double x) { return -3 * x + 1; }, [](double, double) { return 0.0; });
    CHECK_NOTHROW(trace_feet(lin, g));
}

TEST_CASE("sampled coefficients: padding and escapes") {
    auto sol = soliton();
    Grid coarse(-12, 12, 481, 0, 0.5, 51);
    auto sampled = KdvSolution::from_samples(sol.sample(coarse));
    Grid out(-10, 10, 41, 0, 0.5, 3);
    try {
        trace_feet(sampled.transport_coefficients(0.0), out);
        FAIL("expected padding error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InvalidArgument);
    }

    TraceOptions loose;
    loose.enforce_padding = false;
    auto boosted = KdvSolution::from_samples(
        KdvSolution::from_spec(KdvSpec::boosted(KdvSpec::soliton(1.0), 1.0)).sample(coarse));
    Grid edge(-11.5, 11.5, 47, 0, 0.5, 3);
    try {
        trace_feet(boosted.transport_coefficients(0.0), edge, loose);
        FAIL("expected a domain escape");
    } catch (const DomainEscapeError& e) {
        CHECK(!e.nodes().empty());
        for (const auto& n : e.nodes()) {
            CHECK(n.time_index > 0);
            CHECK(edge.x().at(n.space_index) > 10.9);
        }
    }

    Grid wide(-120, 120, 4801, 0, 0.5, 51);
    auto padded = KdvSolution::from_samples(sol.sample(wide));
    Grid small(-4, 4, 41, 0, 0.5, 3);
    auto u = solve_first_order(padded.transport_coefficients(0.0), Profile([](double x) { return 1 / std::cosh(x); }), small);
    auto exact = solve_first_order(sol.transport_coefficients(0.0), Profile([](double x) { return 1 / std::cosh(x); }), small);
    for (std::size_t k = 0; k < u.values().size(); ++k) {
        CHECK(u.values()[k] == doctest::Approx(exact.values()[k]).epsilon(1e-4));
    }
}

TEST_CASE("transport keeps L2 norms bounded under refinement") {
    std::mt19937 rng(99);
    std::uniform_real_distribution<double> centre(-3.0, 3.0);
    std::uniform_real_distribution<double> width(0.5, 2.0);
    auto q = soliton();
    auto pair = q.transport_coefficients(0.3);
    auto ratio_at = [&](int nx, double c, double w) {
        Grid g(-20, 20, nx, 0, 0.5, 3);
        auto bump = [c, w](double x) {
            const double s = (x - c) / w;
            return std::abs(s) < 1 ? std::exp(-1 / (1 - s * s)) : 0.0;
        };
        auto u = solve_first_order(pair, Profile(bump), g);
        std::vector<double> u0(g.nx());
        for (int j = 0; j < g.nx(); ++j) u0[j] = bump(g.x().at(j));
        return l2_norm(u.row(g.nt() - 1), g.h()) / l2_norm(u0, g.h());
    };
    for (int trial = 0; trial < 5; ++trial) {
        const double c = centre(rng);
        const double w = width(rng);
        const double coarse = ratio_at(801, c, w);
        const double fine = ratio_at(1601, c, w);
        CHECK(coarse < 3.0);
        CHECK(coarse > 1.0 / 3.0);
        CHECK(std::abs(coarse - fine) < 1e-3);
    }
}
