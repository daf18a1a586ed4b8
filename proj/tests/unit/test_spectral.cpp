#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "qlpair/kdv.hpp"
#include "qlpair/miura.hpp"
#include "qlpair/spectral.hpp"

using namespace qlp;

namespace {

double sech(double x) { return 1.0 / std::cosh(x); }

Slice sampled(double lo, double hi, int n, const std::function<double(double)>& f) {
    return Slice::sample(Axis{lo, (hi - lo) / (n - 1), n}, f);
}

// Cyclic Jacobi rotations on a dense symmetric matrix.
std::vector<double> dense_eigenvalues(std::vector<std::vector<double>> a) {
    const int n = static_cast<int>(a.size());
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
        if (off < 1e-30) break;
        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                if (std::abs(a[p][q]) < 1e-300) continue;
                const double theta = (a[q][q] - a[p][p]) / (2 * a[p][q]);
                const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1));
                const double c = 1 / std::sqrt(t * t + 1), s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    std::vector<double> ev(n);
    for (int k = 0; k < n; ++k) ev[k] = a[k][k];
    std::sort(ev.begin(), ev.end());
    return ev;
}

TridiagonalOperator raw_operator(std::vector<double> d, std::vector<double> e) {
    TridiagonalOperator op;
    op.h = 1.0;
    op.axis = Axis{0, 1, static_cast<int>(d.size())};
    op.diagonal = std::move(d);
    op.off_diagonal = std::move(e);
    return op;
}

double l2(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace

TEST_CASE("bisection on small matrices") {
    const auto r = eigen_bisect(raw_operator({1, 3}, {0}), Window{0, 4});
    REQUIRE(r.eigenvalues.size() == 2);
    CHECK(r.eigenvalues[0] == doctest::Approx(1).epsilon(1e-12));
    CHECK(r.eigenvalues[1] == doctest::Approx(3).epsilon(1e-12));
    CHECK(r.multiplicities == std::vector<int>{1, 1});

    const auto dbl = eigen_bisect(raw_operator({2, 2}, {0}), Window{0, 4});
    CHECK(dbl.eigenvalues.size() == 1);
    CHECK(dbl.multiplicities == std::vector<int>{2});

    CHECK_THROWS_AS(eigen_bisect(raw_operator({1, 3}, {0}), Window{1, 4}, 1e-9), Error);
    CHECK_THROWS_AS(eigen_bisect(raw_operator({1, 3}, {0}), Window{1, 1}), Error);
}

TEST_CASE("discrete Dirichlet Laplacian") {
    const int nodes = 201;
    const Slice zero = sampled(-5, 5, nodes, [](double) { return 0.0; });
    const auto op = discretize_schrodinger(zero);
    const double h = zero.axis.step, len = zero.axis.last() - zero.axis.start;
    const auto r = eigen_bisect(op, Window{-1, 4.5 / (h * h)});
    REQUIRE(r.eigenvalues.size() == static_cast<std::size_t>(nodes - 2));
    for (int k = 1; k <= nodes - 2; ++k) {
        const double s = std::sin(k * std::numbers::pi * h / (2 * len));
        CHECK(std::abs(r.eigenvalues[k - 1] - 4 / (h * h) * s * s) <= 1e-9 * (1 + r.eigenvalues[k - 1]));
    }
}

TEST_CASE("Schrodinger eigenvalues") {
    SUBCASE("harmonic oscillator") {
        const auto op = discretize_schrodinger(sampled(-12, 12, 4000, [](double x) { return x * x; }));
        const auto r = eigen_bisect(op, Window{0, 6});
        REQUIRE(r.eigenvalues.size() == 3);
        for (int k = 0; k < 3; ++k) CHECK(std::abs(r.eigenvalues[k] - (2 * k + 1)) <= 1e-3);
    }
    SUBCASE("one-level well") {
        const auto op = discretize_schrodinger(sampled(-30, 30, 2000, [](double x) { return -2 * sech(x) * sech(x); }));
        const auto r = eigen_bisect(op, Window{-3, -1e-3});
        REQUIRE(r.eigenvalues.size() == 1);
        CHECK(std::abs(r.eigenvalues[0] + 1) <= 1e-4);
    }
    SUBCASE("two-level well") {
        const auto op = discretize_schrodinger(sampled(-30, 30, 2000, [](double x) { return -6 * sech(x) * sech(x); }));
        const auto r = eigen_bisect(op, Window{-5, -1e-3});
        REQUIRE(r.eigenvalues.size() == 2);
        CHECK(std::abs(r.eigenvalues[0] + 4) <= 1e-3);
        CHECK(std::abs(r.eigenvalues[1] + 1) <= 1e-3);
    }
}

TEST_CASE("property: Sturm counts match a dense eigensolver") {
    std::mt19937_64 rng(31337);
    std::uniform_real_distribution<double> u(-2, 2);
    std::uniform_int_distribution<int> size(2, 25);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = size(rng);
        std::vector<double> d(n), e(n - 1);
        for (double& v : d) v = u(rng);
        for (double& v : e) v = u(rng);
        std::vector<std::vector<double>> dense(n, std::vector<double>(n, 0.0));
        for (int j = 0; j < n; ++j) {
            dense[j][j] = d[j];
            if (j + 1 < n) dense[j][j + 1] = dense[j + 1][j] = e[j];
        }
        const auto ev = dense_eigenvalues(dense);
        const auto op = raw_operator(d, e);
        for (int probe = 0; probe < 10; ++probe) {
            const double mu = 2.5 * u(rng);
            const int expected = static_cast<int>(std::lower_bound(ev.begin(), ev.end(), mu) - ev.begin());
            CHECK(sturm_count(op, mu) == expected);
        }
        const auto r = eigen_bisect(op, Window{-10, 10});
        REQUIRE(r.eigenvalues.size() == ev.size());
        for (int k = 0; k < n; ++k) CHECK(std::abs(r.eigenvalues[k] - ev[k]) <= 1e-10);
    }
}

TEST_CASE("eigenvectors and bound states") {
    const Slice q = sampled(-30, 30, 2001, [](double x) { return -2 * sech(x) * sech(x); });
    const BoundState b = bound_state(q, Window{-3, -1e-3});
    CHECK(std::abs(b.lambda + 1) <= 1e-4);
    double worst = 0;
    for (int j = 0; j < q.size(); ++j) worst = std::max(worst, std::abs(b.psi[j] - sech(q.axis.at(j)) / std::sqrt(2.0)));
    CHECK(worst <= 1e-4);
    CHECK(edge_amplitude(b.psi.values) == 0.0);

    const auto op = discretize_schrodinger(q);
    const auto y = eigenvector(op, b.lambda);
    const auto ly = op.apply(y);
    std::vector<double> res(y.size());
    for (std::size_t j = 0; j < y.size(); ++j) res[j] = ly[j] - b.lambda * y[j];
    CHECK(l2(res) / l2(y) <= 1e-8);
}

TEST_CASE("shooting reproduces the reflectionless scattering state") {
    const double k = 0.5;
    auto exact = [k](double x) { return k * std::sin(k * x) + std::tanh(x) * std::cos(k * x); };
    const Slice q = sampled(-20, 20, 4001, [](double x) { return -2 * sech(x) * sech(x); });
    const int n = q.size();
    const Slice psi = shoot(q, k * k, exact(q.axis.at(n - 1)), exact(q.axis.at(n - 2)));
    double worst = 0;
    for (int j = 0; j < n; ++j) worst = std::max(worst, std::abs(psi[j] - exact(q.axis.at(j))));
    CHECK(worst <= 1e-6);
}

TEST_CASE("weighted symmetry of the impedance operator") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int trial = 0; trial < 10; ++trial) {
        const double a = u(rng), b = 2 * u(rng), c = u(rng);
        const Slice r = sampled(-4, 4, 401, [&](double x) { return a + c * std::tanh(b * x); });
        const auto op = discretize_impedance(r);
        std::vector<double> x(op.size()), y(op.size());
        for (auto& v : x) v = u(rng);
        for (auto& v : y) v = u(rng);
        const double lhs = op.inner(op.apply(x), y), rhs = op.inner(x, op.apply(y));
        CHECK(std::abs(lhs - rhs) <= 1e-12 * (std::abs(lhs) + op.inner(x, x) / (op.h * op.h)));
    }
}

TEST_CASE("impedance conjugation") {
    SUBCASE("r = 0") {
        const auto rep = impedance_conjugation(sampled(-5, 5, 501, [](double) { return 0.0; }));
        CHECK(rep.residual == 0.0);
        CHECK(rep.spectrum_dev <= 1e-12);
        CHECK(rep.battery == 20);
    }
    SUBCASE("r = c") {
        const auto rep = impedance_conjugation(sampled(-5, 5, 3001, [](double) { return 1.0; }));
        CHECK(rep.residual <= 1e-6);
        CHECK(rep.spectrum_dev <= 1e-5);
    }
    SUBCASE("kink: second order, spectra agree") {
        const auto coarse = impedance_conjugation(sampled(-10, 10, 1001, [](double x) { return -std::tanh(x); }));
        const auto fine = impedance_conjugation(sampled(-10, 10, 2001, [](double x) { return -std::tanh(x); }));
        CHECK(coarse.residual / fine.residual >= 3.5);
        CHECK(fine.spectrum_dev <= 1e-5);
        REQUIRE_FALSE(fine.t_spectrum.empty());
        CHECK(std::abs(fine.t_spectrum[0]) <= 1e-4);
        // rho^2 = sech^2 x stays above 1e-8 for |x| < 9.9
        CHECK(fine.axis.start == doctest::Approx(-9.9).epsilon(1e-3));
        CHECK(fine.axis.last() == doctest::Approx(9.9).epsilon(1e-3));
    }
}

TEST_CASE("spectrum invariance") {
    SUBCASE("soliton") {
        const auto sol = KdvSolution::from_spec(parse_kdv_spec("soliton:kappa=1,x0=0"));
        const auto rep = spectrum_invariance(sol, Axis{-30, 60.0 / 1999, 2000}, {0, 0.25, 0.5}, Window{-2, -0.5});
        REQUIRE(rep.paired);
        for (const auto& ev : rep.eigenvalues) {
            REQUIRE(ev.size() == 1);
            CHECK(std::abs(ev[0] + 1) <= 1e-4);
        }
        CHECK(rep.max_pair_dev <= 1e-6);
        CHECK(rep.edge_amplitude < 1e-10);
        const auto j = to_json(rep);
        for (const char* key : {"times", "eigenvalues", "max_pair_dev", "multiplicities"}) CHECK(j.contains(key));
    }
    SUBCASE("static zero") {
        const auto rep = spectrum_invariance(KdvSolution::from_spec(KdvSpec::zero()), Axis{-10, 0.05, 401}, {0, 1},
                                             Window{-1, 0.5});
        CHECK(rep.paired);
        CHECK(rep.max_pair_dev == 0.0);
    }
    SUBCASE("numerical KdV flow") {
        const Slice q0 = Slice::sample(Axis{-30, 60.0 / 1024, 1024}, [](double x) { return -3.5 * sech(x) * sech(x); });
        const SampledField q = solve_numeric(q0, 0.5, 3);
        const auto rep = spectrum_invariance(q, {0, 0.5}, Window{-3, -0.05});
        CHECK(rep.paired);
        CHECK(rep.eigenvalues[0].size() == 2);
        CHECK(rep.max_pair_dev <= 1e-5);
    }
    SUBCASE("a changed spectrum is reported") {
        const Slice a = sampled(-20, 20, 801, [](double x) { return -2 * sech(x) * sech(x); });
        const Slice b = sampled(-20, 20, 801, [](double x) { return -2.2 * sech(x) * sech(x); });
        const auto rep = spectrum_invariance(std::vector<Slice>{a, b}, {0, 1}, Window{-3, -0.01});
        CHECK_FALSE(rep.paired);
        CHECK(rep.message.find("invariance violation") == 0);
    }
    CHECK_THROWS_AS(spectrum_invariance(SampledField(Grid(-1, 1, 11, 0, 1, 3)), {0.3}, Window{-1, 0}), Error);
}

TEST_CASE("impedance invariance") {
    const Grid g(-10, 10, 2001, 0, 0.3, 4);
    SUBCASE("static r") {
        for (double c : {0.0, 0.5}) {
            const auto r = SampledField::sample(g, [c](double, double) { return c; });
            const auto rep = impedance_invariance(r, {0, 0.3}, Window{-1, 2});
            CHECK(rep.paired);
            CHECK(rep.max_pair_dev <= 1e-12);
        }
    }
    SUBCASE("travelling kink") {
        const auto r = SampledField::sample(g, [](double t, double x) { return -std::tanh(x + 2 * t); });
        const auto rep = impedance_invariance(r, {0, 0.3}, Window{-0.5, 0.5});
        CHECK(rep.paired);
        CHECK(rep.max_pair_dev <= 1e-4);
    }
}

TEST_CASE("eigenfunction transport") {
    SUBCASE("free plane wave") {
        const double k = 1.3, lambda = k * k;
        const Grid g(-10, 10, 801, 0, 0.5, 11);
        const auto out = transport_eigenfunction(KdvSolution::from_spec(KdvSpec::zero()),
                                                 Profile([k](double x) { return std::cos(k * x); }), lambda, g);
        double worst = 0;
        for (int i = 0; i < g.nt(); ++i)
            for (int j = 0; j < g.nx(); ++j)
                worst = std::max(worst, std::abs(out.psi(i, j) - std::cos(k * (g.x().at(j) + 4 * lambda * g.t().at(i)))));
        CHECK(worst <= 1e-10);
        CHECK(out.max_residual <= 1e-6);
    }
    const auto sol = KdvSolution::from_spec(parse_kdv_spec("soliton:kappa=1,x0=0"));
    SUBCASE("exact bound state") {
        const Grid g(-20, 20, 2001, 0, 0.5, 26);
        const auto out = transport_eigenfunction(sol, Profile([](double x) { return sech(x); }), -1.0, g);
        CHECK(out.max_residual <= 1e-4);
        CHECK(std::abs(out.min_ratio - 1) <= 1e-6);
        CHECK(std::abs(out.max_ratio - 1) <= 1e-6);
    }
    SUBCASE("computed bound state") {
        const Slice q0 = sol.sample(Axis{-30, 0.005, 12001}, 0.0);
        const BoundState b = bound_state(q0, Window{-2, -0.5});
        const Grid g(-20, 20, 2001, 0, 0.5, 26);
        const auto out = transport_eigenfunction(sol, Profile(b.psi), b.lambda, g);
        CHECK(out.max_residual <= 1e-4);
        CHECK(out.min_ratio >= 0.99);
        CHECK(out.max_ratio <= 1.01);
    }
    SUBCASE("scattering state") {
        const double k = 0.5;
        const Slice q0 = sol.sample(Axis{-30, 0.01, 6001}, 0.0);
        const int n = q0.size();
        const Slice psi0 = shoot(q0, k * k, std::cos(k * q0.axis.at(n - 1)), std::cos(k * q0.axis.at(n - 2)));
        const Grid g(-20, 20, 2001, 0, 0.5, 26);
        const auto out = transport_eigenfunction(sol, Profile(psi0), k * k, g);
        CHECK(out.max_residual <= 1e-3);
    }
}

TEST_CASE("property: transported norms are bounded independently of the grid") {
    const auto sol = KdvSolution::from_spec(parse_kdv_spec("soliton:kappa=1,x0=0"));
    std::mt19937_64 rng(4242);
    std::uniform_real_distribution<double> centre(-4, 4), width(0.5, 2.5), lam(-1, 1);
    for (int m = 0; m < 10; ++m) {
        const double c = centre(rng), w = width(rng), lambda = lam(rng);
        const Profile bump([c, w](double x) {
            const double s = (x - c) / w;
            return std::abs(s) < 1 ? std::exp(-1 / (1 - s * s)) : 0.0;
        });
        const auto coarse = transport_eigenfunction(sol, bump, lambda, Grid(-15, 15, 751, 0, 0.5, 6));
        const auto fine = transport_eigenfunction(sol, bump, lambda, Grid(-15, 15, 1501, 0, 0.5, 11));
        CHECK(std::isfinite(fine.max_ratio));
        CHECK(std::abs(coarse.max_ratio - fine.max_ratio) <= 1e-3 * fine.max_ratio);
    }
}

TEST_CASE("free Lax evolution") {
    const int n = 1024;
    const Slice g0 = Slice::sample(Axis{-20, 40.0 / n, n}, [](double x) { return std::exp(-x * x / 2); });
    SUBCASE("identity at t = 0") {
        const auto out = lax_evolution_free(g0, 0.0);
        double worst = 0;
        for (int j = 0; j < n; ++j) worst = std::max(worst, std::abs(out.psi[j] - g0[j]));
        CHECK(worst <= 1e-14);
    }
    SUBCASE("unitary and equal to the Fourier integral") {
        const double t = 0.1;
        // wide enough that the dispersive tail does not wrap around
        const int m = 4096;
        const Slice wide = Slice::sample(Axis{-80, 160.0 / m, m}, [](double x) { return std::exp(-x * x / 2); });
        const auto out = lax_evolution_free(wide, t);
        CHECK(std::abs(out.norm_ratio - 1) <= 1e-10);
        // psi(t, x) = (1/2pi) int sqrt(2pi) e^{-k^2/2} cos(kx + 4k^3 t) dk
        for (int j = 1500; j < 2600; j += 37) {
            const double x = wide.axis.at(j);
            const int m = 24000;
            const double dk = 24.0 / m;
            double s = 0;
            for (int i = 0; i <= m; ++i) {
                const double k = -12 + i * dk;
                s += (i == 0 || i == m ? 0.5 : 1.0) * std::exp(-k * k / 2) * std::cos(k * x + 4 * k * k * k * t);
            }
            CHECK(std::abs(out.psi[j] - s * dk / std::sqrt(2 * std::numbers::pi)) <= 1e-10);
        }
    }
    SUBCASE("rejects non-decaying data") {
        CHECK_THROWS_AS(lax_evolution_free(Slice::sample(Axis{-20, 40.0 / n, n}, [](double) { return 1.0; }), 0.1), Error);
        CHECK_THROWS_AS(lax_evolution_free(Slice::sample(Axis{-20, 0.04, 1000}, [](double x) { return std::exp(-x * x); }), 0.1),
                        Error);
    }
    SUBCASE("narrow band follows the characteristic transport") {
        const double k0 = 1.0, lambda = k0 * k0, t = 0.1;
        auto mismatch = [&](double bandwidth) {
            const int m = 16384;
            const Axis ax{-512, 1024.0 / m, m};
            const auto packet = [bandwidth, k0](double x) {
                const double s = bandwidth * x;
                return std::exp(-s * s / 2) * std::cos(k0 * x);
            };
            const Slice p0 = Slice::sample(ax, packet);
            const auto free = lax_evolution_free(p0, t);
            const auto moved = transport_psi(KdvSolution::from_spec(KdvSpec::zero()), Profile(packet),
                                             Grid(ax, Axis{0, t, 2}), lambda);
            std::vector<double> diff(m);
            for (int j = 0; j < m; ++j) diff[j] = free.psi[j] - moved(1, j);
            return l2(diff) / l2(p0.values);
        };
        const double wide = mismatch(0.05), narrow = mismatch(0.025);
        CHECK(wide <= 0.05);
        CHECK(narrow < wide);
    }
}

TEST_CASE("Lax conjugation") {
    SUBCASE("free") {
        const int n = 512;
        const Slice g0 = Slice::sample(Axis{-20, 40.0 / n, n}, [](double x) { return std::exp(-x * x / 2); });
        const auto rep = lax_conjugation_check(KdvSolution::from_spec(KdvSpec::zero()), g0, 0.2);
        CHECK(rep.residual <= 1e-13);
    }
    const auto sol = KdvSolution::from_spec(parse_kdv_spec("soliton:kappa=1,x0=0"));
    for (int shape = 0; shape < 2; ++shape) {
        CAPTURE(shape);
        auto f = [shape](double x) { return (shape ? -x : 1.0) * std::exp(-x * x / 2); };
        const auto coarse = lax_conjugation_check(sol, Slice::sample(Axis{-20, 40.0 / 1024, 1024}, f), 0.2);
        const auto fine =
            lax_conjugation_check(sol, Slice::sample(Axis{-20, 40.0 / 2048, 2048}, f), 0.2, 2 * coarse.steps);
        CHECK(coarse.residual <= 1e-3);
        CHECK(fine.residual * 4 <= coarse.residual);
        CHECK(std::abs(coarse.norm_ratio - 1) <= 1e-6);
    }
}
