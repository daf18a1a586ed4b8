#include <cmath>
#include <random>

#include "doctest.h"
#include "qlpair/miura.hpp"

using namespace qlp;

namespace {

double sech(double x) { return 1.0 / std::cosh(x); }

double max_diff(const SampledField& a, const std::function<double(double, double)>& f, int band = 0) {
    double m = 0.0;
    for (int i = 0; i < a.nt(); ++i) {
        for (int j = band; j < a.nx() - band; ++j) {
            m = std::max(m, std::abs(a(i, j) - f(a.grid().t().at(i), a.grid().x().at(j))));
        }
    }
    return m;
}

double max_diff(const Slice& s, const std::function<double(double)>& f, int band = 0) {
    double m = 0.0;
    for (int j = band; j < s.size() - band; ++j) m = std::max(m, std::abs(s[j] - f(s.axis.at(j))));
    return m;
}

KdvSolution kink_background() { return KdvSolution::from_spec(parse_kdv_spec("boost:c=1(soliton:kappa=1,x0=0)")); }

Profile kink() {
    return Profile([](double x) { return -std::tanh(x); });
}

// Travelling kink of width 1/kappa centred at x0: r0 = -kappa tanh(kappa (x - x0))
// sits on the fiber of the soliton boosted by kappa^2.
struct KinkCase {
    double kappa;
    double x0;
};

KinkCase draw_kink(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> kappa(0.6, 1.4), shift(-2.0, 2.0);
    return {kappa(rng), shift(rng)};
}

KdvSolution background_of(const KinkCase& k) {
    return KdvSolution::from_spec(KdvSpec::boosted(KdvSpec::soliton(k.kappa, k.x0), k.kappa * k.kappa));
}

Profile profile_of(const KinkCase& k) {
    return Profile([k](double x) { return -k.kappa * std::tanh(k.kappa * (x - k.x0)); });
}

double kink_exact(const KinkCase& k, double t, double x) {
    return -k.kappa * std::tanh(k.kappa * (x - k.x0 + 2 * k.kappa * k.kappa * t));
}

Slice gaussian(const Axis& x, double centre = 0.3, double width = 1.0) {
    return Slice::sample(x, [=](double v) { return std::exp(-(v - centre) * (v - centre) / (width * width)); });
}

}  // namespace

TEST_CASE("miura map examples") {
    const Axis x = Axis::snapped(-8, 8, 1601);
    CHECK(max_diff(miura_map(Slice::sample(x, [](double) { return 0.0; })), [](double) { return 0.0; }) == 0.0);
    CHECK(max_diff(miura_map(Slice::sample(x, [](double) { return 1.5; })), [](double) { return 2.25; }) == 0.0);
    const Slice b = miura_map(Slice::sample(x, [](double v) { return -std::tanh(v); }));
    CHECK(max_diff(b, [](double v) { return 1 - 2 * sech(v) * sech(v); }) < 1e-7);
}

TEST_CASE("initial kernel element") {
    const Axis x = Axis::snapped(-6, 6, 1201);
    const Slice one = psi_initial(Slice::sample(x, [](double) { return 0.0; }));
    CHECK(max_diff(one, [](double) { return 1.0; }) == 0.0);
    const Slice e = psi_initial(Slice::sample(x, [](double) { return 0.4; }));
    CHECK(max_diff(e, [](double v) { return std::exp(0.4 * v); }) < 1e-12);
    const Slice s = psi_initial(Slice::sample(x, [](double v) { return -std::tanh(v); }));
    CHECK(s[*x.zero_index()] == 1.0);
    CHECK(max_diff(s, [](double v) { return sech(v); }) < 1e-8);
}

TEST_CASE("transport of kernel elements") {
    const Grid g(-6, 6, 601, 0, 0.5, 11);
    const Profile bump([](double v) { return std::exp(-v * v); });
    SUBCASE("q = 0 leaves psi unchanged") {
        auto psi = transport_psi(KdvSolution::from_spec(KdvSpec::zero()), bump, g);
        CHECK(max_diff(psi, [](double, double v) { return std::exp(-v * v); }) == 0.0);
    }
    SUBCASE("constant q shifts psi") {
        auto psi = transport_psi(KdvSolution::from_spec(KdvSpec::constant(0.8)), bump, g);
        CHECK(max_diff(psi, [](double t, double v) { return std::exp(-(v + 1.6 * t) * (v + 1.6 * t)); }) < 1e-12);
    }
    SUBCASE("kink background carries sech") {
        auto psi = transport_psi(kink_background(), Profile([](double v) { return sech(v); }), g);
        CHECK(max_diff(psi, [](double t, double v) { return sech(v + 2 * t); }) < 1e-6);
    }
    SUBCASE("log form agrees") {
        auto p = transport_log_psi(kink_background(), Profile([](double v) { return -std::log(std::cosh(v)); }), g);
        CHECK(max_diff(p, [](double t, double v) { return -std::log(std::cosh(v + 2 * t)); }) < 1e-6);
    }
}

TEST_CASE("pipeline trivial cases") {
    const Grid g(-5, 5, 501, 0, 0.5, 11);
    SUBCASE("zero") {
        auto res = invert_miura_flow(Profile([](double) { return 0.0; }), KdvSolution::from_spec(KdvSpec::zero()), g);
        CHECK(max_diff(res.r, [](double, double) { return 0.0; }) == 0.0);
        CHECK(res.diagnostics.min_psi == 1.0);
    }
    SUBCASE("constant") {
        const double c = 0.6;
        auto res = invert_miura_flow(Profile([=](double) { return c; }),
                                     KdvSolution::from_spec(KdvSpec::constant(c * c)), g);
        CHECK(max_diff(res.r, [=](double, double) { return c; }) < 1e-10);
        auto rho = rho_crosscheck(res.r, res.log_psi);
        CHECK(rho.max_dev < 1e-6);
        for (int i = 0; i < g.nt(); ++i) {
            CHECK(rho.log_rho0[i] == doctest::Approx(2 * c * c * c * g.t().at(i)).epsilon(1e-9));
        }
        CHECK(max_diff(res.log_psi, [=](double t, double x) { return c * x + 2 * c * c * c * t; }) < 1e-10);
    }
}

TEST_CASE("kink pipeline") {
    const Grid g(-10, 10, 1001, 0, 0.5, 51);
    auto res = invert_miura_flow(kink(), kink_background(), g);
    CHECK(max_diff(res.r, [](double t, double x) { return -std::tanh(x + 2 * t); }) < 1e-5);
    CHECK(max_diff(res.psi(), [](double t, double x) { return sech(x + 2 * t); }) < 1e-6);
    REQUIRE(res.diagnostics.mkdv_residual);
    CHECK(*res.diagnostics.mkdv_residual <= 1e-4);
    CHECK(res.diagnostics.kernel_residual < 1e-6);
    CHECK(res.diagnostics.min_psi > 0.0);
    REQUIRE(res.diagnostics.wronskian_drift);
    CHECK(*res.diagnostics.wronskian_drift <= 1e-5);

    SUBCASE("rho cross-check") {
        auto rho = rho_crosscheck(res.r, res.log_psi);
        CHECK(rho.max_dev <= 1e-5);
        for (int i = 0; i < g.nt(); ++i) {
            CHECK(std::abs(rho.log_rho0[i] + std::log(std::cosh(2 * g.t().at(i)))) < 1e-6);
        }
    }
    SUBCASE("diagnostics json") {
        auto j = to_json(res.diagnostics);
        for (const char* key : {"min_psi", "kernel_residual", "mkdv_residual", "wronskian_drift"}) {
            CHECK(j.contains(key));
        }
    }
}

TEST_CASE("pipeline from samples") {
    const Grid g(-10, 10, 801, 0, 0.3, 31);
    const SampledField q = kink_background().sample(Grid(Axis::snapped(-20, 20, 1601), g.t()));
    const Slice r0 = Slice::sample(Axis::snapped(-20, 20, 1601), [](double v) { return -std::tanh(v); });
    PipelineOptions opt;
    opt.trace.enforce_padding = false;
    auto res = invert_miura_flow(r0, q, g.x(), opt);
    CHECK(res.r.grid().nx() == 801);
    CHECK(max_diff(res.r, [](double t, double x) { return -std::tanh(x + 2 * t); }) < 1e-5);

    // the output window must leave room for the backward characteristics
    try {
        invert_miura_flow(r0, q, Axis::snapped(-20, 20, 1601), opt);
        FAIL("accepted");
    } catch (const DomainEscapeError& e) {
        CHECK(!e.nodes().empty());
    }
}

TEST_CASE("consistency gate") {
    const Grid g(-5, 5, 201, 0, 0.1, 6);
    try {
        invert_miura_flow(kink(), KdvSolution::from_spec(parse_kdv_spec("soliton:kappa=1,x0=0")), g);
        FAIL("accepted");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::MiuraGate);
        CHECK(std::string(e.what()).find("not Miura-compatible") != std::string::npos);
    }
    PipelineOptions loose;
    loose.gate_tol = 10.0;
    CHECK_NOTHROW(invert_miura_flow(kink(), KdvSolution::from_spec(parse_kdv_spec("soliton:kappa=1,x0=0")), g, loose));
}

TEST_CASE("wronskian") {
    const Grid g(-3, 3, 301, 0, 1, 5);
    SUBCASE("phi = psi") {
        auto psi = SampledField::sample(g, [](double t, double x) { return std::exp(std::sin(x) + t); });
        auto rep = wronskian(psi, psi);
        for (double v : rep.w.values()) CHECK(v == 0.0);
        CHECK(rep.drift == 0.0);
    }
    SUBCASE("exponential pair") {
        auto phi = SampledField::sample(g, [](double, double x) { return std::exp(-x); });
        auto psi = SampledField::sample(g, [](double, double x) { return std::exp(x); });
        auto rep = wronskian(phi, psi);
        CHECK(rep.reference == doctest::Approx(2.0).epsilon(1e-7));
        CHECK(rep.drift < 1e-6);
    }
    SUBCASE("pipeline drift converges") {
        std::vector<double> drift;
        for (int k : {1, 2}) {
            const Grid gk(-8, 8, 200 * k + 1, 0, 0.5, 10 * k + 1);
            auto res = invert_miura_flow(kink(), kink_background(), gk);
            drift.push_back(*res.diagnostics.wronskian_drift);
        }
        CHECK(drift[1] <= 1e-5);
        CHECK(drift[0] / drift[1] >= 4.0);
    }
}

TEST_CASE("commutator identity") {
    SUBCASE("q = 0") {
        const Grid g(-8, 8, 801, 0, 0.1, 11);
        auto reps = commutator_check(SampledField(g), gaussian(g.x()));
        REQUIRE(reps.size() == 4);
        CHECK(reps[0].identity_residual == 0.0);
        CHECK(reps[0].lax_residual == 0.0);
        for (const auto& r : reps) {
            CHECK(r.identity_residual < 1e-10);
            CHECK(r.lax_residual < 1e-10);
        }
    }
    SUBCASE("soliton, convergent") {
        const auto sol = KdvSolution::from_spec(parse_kdv_spec("soliton:kappa=1,x0=0"));
        std::vector<std::vector<CommutatorReport>> runs;
        for (double h : {0.02, 0.01}) {
            const int nx = static_cast<int>(std::lround(16 / h)) + 1;
            const Grid g(-8, 8, nx, 0, 0.1, 11);
            runs.push_back(commutator_check(sol.sample(g), gaussian(g.x())));
        }
        for (std::size_t k = 0; k < runs[1].size(); ++k) {
            CAPTURE(runs[1][k].lambda);
            CHECK(runs[1][k].identity_residual <= 1e-3);
            CHECK(runs[0][k].identity_residual / runs[1][k].identity_residual >= 4.0);
        }
    }
    SUBCASE("non-KdV control") {
        const Grid g(-8, 8, 1601, 0, 0.5, 51);
        auto q = SampledField::sample(g, [](double t, double x) { return t * sech(x) * sech(x); });
        const Slice phi = gaussian(g.x());
        // KdV(q) for q = t sech^2 written out by hand
        double exact = 0.0;
        for (int i = kBoundaryLevels; i < g.nt() - kBoundaryLevels; ++i) {
            const double t = g.t().at(i);
            std::vector<double> term(g.nx());
            for (int j = 0; j < g.nx(); ++j) {
                const double x = g.x().at(j), s2 = sech(x) * sech(x), th = std::tanh(x);
                const double qt = s2, qx = -2 * t * s2 * th, qxxx = t * (-8 * s2 * th + 24 * s2 * s2 * th);
                term[j] = (qt - 6 * t * s2 * qx + qxxx) * phi[j];
            }
            exact = std::max(exact, interior_l2(term, g.h(), 8) / interior_l2(phi.values, g.h(), 8));
        }
        for (const auto& r : commutator_check(q, phi)) {
            CAPTURE(r.lambda);
            CHECK(r.identity_residual < 1e-4);
            CHECK(std::abs(r.lax_residual - exact) <= 1e-3);
            CHECK(r.lax_residual > 0.1);
        }
    }
}

TEST_CASE("factorization") {
    const Axis x = Axis::snapped(-8, 8, 1601);
    const Slice phi = gaussian(x);
    CHECK(factorization_check(Slice::sample(x, [](double) { return 0.0; }), 0.0, phi) < 1e-10);
    const Slice q = Slice::sample(x, [](double v) { return -2 * sech(v) * sech(v); });
    CHECK(factorization_check(q, 0.0, phi) <= 1e-4);
    CHECK(factorization_check(q, 2.0, phi) <= 1e-4);
}

TEST_CASE("property: round trip and positivity over random kinks") {
    std::mt19937_64 rng(20240611);
    const Grid g(-8, 8, 801, 0, 0.3, 16);
    for (int trial = 0; trial < 6; ++trial) {
        const KinkCase k = draw_kink(rng);
        CAPTURE(k.kappa);
        CAPTURE(k.x0);
        auto res = invert_miura_flow(profile_of(k), background_of(k), g);
        CHECK(res.diagnostics.min_psi > 0.0);
        CHECK(max_diff(res.r, [&](double t, double x) { return kink_exact(k, t, x); }) < 1e-5);
        // initial-data fidelity
        double first = 0.0;
        for (int j = 0; j < g.nx(); ++j) first = std::max(first, std::abs(res.r(0, j) - kink_exact(k, 0, g.x().at(j))));
        CHECK(first < 1e-7);
        // round trip through the Miura map, interior of each level
        const SampledField b = miura_map(res.r);
        CHECK(max_diff(b, [&](double t, double x) { return background_of(k).q(t, x); }, 2) < 2e-5);
    }
}

TEST_CASE("property: runs with different substeps converge together") {
    std::mt19937_64 rng(77);
    const KinkCase k = draw_kink(rng);
    const Grid g(-6, 6, 601, 0, 0.4, 9);
    std::vector<double> gaps;
    for (double step : {0.02, 0.01}) {
        PipelineOptions a, b;
        a.trace.max_step = step;
        b.trace.max_step = step / 2;
        auto ra = invert_miura_flow(profile_of(k), background_of(k), g, a);
        auto rb = invert_miura_flow(profile_of(k), background_of(k), g, b);
        double gap = 0.0;
        for (std::size_t n = 0; n < ra.r.values().size(); ++n) {
            gap = std::max(gap, std::abs(ra.r.values()[n] - rb.r.values()[n]));
        }
        gaps.push_back(gap);
    }
    CHECK(gaps[1] < gaps[0]);
    CHECK(gaps[1] < 1e-6);
}
