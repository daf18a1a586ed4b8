#include "qlpair/spectral.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "qlpair/fft.hpp"
#include "qlpair/miura.hpp"

namespace qlp {

namespace {

Axis interior_axis(const Axis& a) { return Axis{a.at(1), a.step, a.size - 2}; }

int base_index(const Axis& a) {
    const double j = std::round(-a.start / a.step);
    return static_cast<int>(std::clamp(j, 0.0, static_cast<double>(a.size - 1)));
}

// log rho = int r from the normalization node.
std::vector<double> log_rho(const Slice& r) { return primitive(r.values, r.axis.step, base_index(r.axis)); }

double sum_sq(std::span<const double> u) {
    double s = 0.0;
    for (double v : u) s += v * v;
    return s;
}

}  // namespace

std::vector<double> TridiagonalOperator::apply(std::span<const double> u) const {
    const int n = size();
    if (static_cast<int>(u.size()) != n) throw Error(ErrorKind::InvalidArgument, "vector size does not match operator");
    std::vector<double> out(n);
    for (int j = 0; j < n; ++j) {
        double v = diagonal[j] * u[j];
        if (j > 0) v += off_diagonal[j - 1] * u[j - 1];
        if (j + 1 < n) v += off_diagonal[j] * u[j + 1];
        out[j] = weight ? v / (*weight)[j] : v;
    }
    return out;
}

double TridiagonalOperator::inner(std::span<const double> u, std::span<const double> v) const {
    double s = 0.0;
    for (int j = 0; j < size(); ++j) s += (weight ? (*weight)[j] : 1.0) * u[j] * v[j];
    return s * h;
}

void TridiagonalOperator::symmetric(std::vector<double>& d, std::vector<double>& e) const {
    const int n = size();
    d.resize(n);
    e.resize(n > 0 ? n - 1 : 0);
    for (int j = 0; j < n; ++j) {
        const double w = weight ? (*weight)[j] : 1.0;
        d[j] = diagonal[j] / w;
        if (j + 1 < n) e[j] = weight ? off_diagonal[j] / std::sqrt(w * (*weight)[j + 1]) : off_diagonal[j];
    }
}

TridiagonalOperator discretize_schrodinger(const Slice& q) {
    if (q.size() < 3) throw Error(ErrorKind::InvalidArgument, "operator needs at least 3 nodes");
    TridiagonalOperator op;
    op.h = q.axis.step;
    op.axis = interior_axis(q.axis);
    const double s = 1.0 / (op.h * op.h);
    const int n = op.axis.size;
    op.diagonal.resize(n);
    op.off_diagonal.assign(n - 1, -s);
    for (int j = 0; j < n; ++j) op.diagonal[j] = 2.0 * s + q[j + 1];
    return op;
}

TridiagonalOperator discretize_impedance(const Slice& r) {
    if (r.size() < 3) throw Error(ErrorKind::InvalidArgument, "operator needs at least 3 nodes");
    const std::vector<double> p = log_rho(r);
    TridiagonalOperator op;
    op.h = r.axis.step;
    op.axis = interior_axis(r.axis);
    const double s = 1.0 / (op.h * op.h);
    const int n = op.axis.size;
    op.diagonal.resize(n);
    op.off_diagonal.resize(n - 1);
    std::vector<double> w(n);
    for (int j = 0; j < n; ++j) {
        const int k = j + 1;  // node on r's axis
        const double left = std::exp(p[k - 1] + p[k]);
        const double right = std::exp(p[k] + p[k + 1]);
        op.diagonal[j] = (left + right) * s;
        if (j + 1 < n) op.off_diagonal[j] = -right * s;
        w[j] = std::exp(2.0 * p[k]);
    }
    op.weight = std::move(w);
    return op;
}

Slice impedance_window(const Slice& r, double range) {
    if (!(range > 1.0)) throw Error(ErrorKind::InvalidArgument, "rho range must exceed 1");
    const std::vector<double> p = log_rho(r);
    const double limit = 0.5 * std::log(range);
    const int base = base_index(r.axis);
    int lo = base, hi = base;
    while (lo > 0 && std::abs(p[lo - 1]) <= limit) --lo;
    while (hi + 1 < r.size() && std::abs(p[hi + 1]) <= limit) ++hi;
    if (hi - lo + 1 < 3) throw Error(ErrorKind::InvalidArgument, "impedance window has fewer than 3 nodes");
    return Slice(Axis{r.axis.at(lo), r.axis.step, hi - lo + 1},
                 std::vector<double>(r.values.begin() + lo, r.values.begin() + hi + 1));
}

// ---------------------------------------------------------------------------
// Sturm bisection

namespace {

struct Sym {
    std::vector<double> d;
    std::vector<double> e2;
    double pivmin = 0.0;

    explicit Sym(const TridiagonalOperator& op) {
        std::vector<double> e;
        op.symmetric(d, e);
        e2.resize(e.size());
        double m = 1.0;
        for (std::size_t j = 0; j < e.size(); ++j) {
            e2[j] = e[j] * e[j];
            m = std::max(m, e2[j]);
        }
        pivmin = DBL_MIN * m;
    }

    int count(double mu) const {
        int c = 0;
        double p = 1.0;
        for (std::size_t j = 0; j < d.size(); ++j) {
            p = d[j] - mu - (j > 0 ? e2[j - 1] / p : 0.0);
            if (std::abs(p) < pivmin) p = -pivmin;
            if (p < 0.0) ++c;
        }
        return c;
    }
};

}  // namespace

int sturm_count(const TridiagonalOperator& op, double mu) { return Sym(op).count(mu); }

SpectrumResult eigen_bisect(const TridiagonalOperator& op, Window window, double tol) {
    if (!(tol > 0.0)) throw Error(ErrorKind::InvalidArgument, "bisection tolerance must be positive");
    if (!(window.lo < window.hi)) throw Error(ErrorKind::InvalidArgument, "empty spectral window");
    const Sym sym(op);
    for (double edge : {window.lo, window.hi}) {
        if (sym.count(edge - tol) != sym.count(edge + tol)) {
            throw Error(ErrorKind::InvalidArgument,
                        "window edge " + format_double(edge) + " is within tol of an eigenvalue; widen the window");
        }
    }
    SpectrumResult res;
    res.window = window;
    res.tol = tol;
    res.count_below = sym.count(window.lo);
    const int above = sym.count(window.hi);

    std::vector<double> all;
    for (int k = res.count_below; k < above; ++k) {
        double lo = window.lo, hi = window.hi;
        while (hi - lo > std::max(tol, 4 * DBL_EPSILON * std::max(std::abs(lo), std::abs(hi)))) {
            const double mid = 0.5 * (lo + hi);
            if (sym.count(mid) > k) hi = mid;
            else lo = mid;
        }
        all.push_back(0.5 * (lo + hi));
    }
    for (std::size_t k = 0; k < all.size();) {
        std::size_t m = k + 1;
        while (m < all.size() && all[m] - all[k] <= 2 * tol) ++m;
        res.eigenvalues.push_back(all[k]);
        res.multiplicities.push_back(static_cast<int>(m - k));
        k = m;
    }
    return res;
}

namespace {

// (d - sigma, e) x = b by Gaussian elimination with partial pivoting.
std::vector<double> solve_shifted(const std::vector<double>& d_in, const std::vector<double>& e, double sigma,
                                  std::vector<double> b) {
    const int n = static_cast<int>(d_in.size());
    std::vector<double> d(n), dl(e), du(e), fill(std::max(n - 2, 0), 0.0);
    double scale = 0.0;
    for (int j = 0; j < n; ++j) {
        d[j] = d_in[j] - sigma;
        scale = std::max(scale, std::abs(d[j]) + (j > 0 ? std::abs(e[j - 1]) : 0.0) + (j + 1 < n ? std::abs(e[j]) : 0.0));
    }
    const double tiny = DBL_EPSILON * std::max(scale, DBL_MIN);
    for (int i = 0; i + 1 < n; ++i) {
        if (std::abs(d[i]) >= std::abs(dl[i])) {
            if (d[i] == 0.0) d[i] = tiny;
            const double f = dl[i] / d[i];
            d[i + 1] -= f * du[i];
            b[i + 1] -= f * b[i];
        } else {
            const double f = d[i] / dl[i];
            d[i] = dl[i];
            const double tmp = d[i + 1];
            d[i + 1] = du[i] - f * tmp;
            if (i + 2 < n) {
                fill[i] = du[i + 1];
                du[i + 1] = -f * fill[i];
            }
            du[i] = tmp;
            std::swap(b[i], b[i + 1]);
            b[i + 1] -= f * b[i];
        }
    }
    if (d[n - 1] == 0.0) d[n - 1] = tiny;
    b[n - 1] /= d[n - 1];
    if (n > 1) b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2];
    for (int i = n - 3; i >= 0; --i) b[i] = (b[i] - du[i] * b[i + 1] - fill[i] * b[i + 2]) / d[i];
    return b;
}

void normalize(std::vector<double>& y) {
    const double s = std::sqrt(sum_sq(y));
    for (double& v : y) v /= s;
}

}  // namespace

std::vector<double> eigenvector(const TridiagonalOperator& op, double lambda) {
    std::vector<double> d, e;
    op.symmetric(d, e);
    const int n = op.size();
    std::vector<double> y(n, 1.0);
    normalize(y);
    for (int it = 0; it < 3; ++it) {
        y = solve_shifted(d, e, lambda, y);
        normalize(y);
    }
    // one damped Jacobi sweep on (S - lambda) y = 0
    const double omega = 2.0 / 3.0;
    std::vector<double> next(y);
    for (int j = 0; j < n; ++j) {
        const double diag = d[j] - lambda;
        if (std::abs(diag) < 1e-8 * (std::abs(d[j]) + 1.0)) continue;
        double res = diag * y[j];
        if (j > 0) res += e[j - 1] * y[j - 1];
        if (j + 1 < n) res += e[j] * y[j + 1];
        next[j] = y[j] - omega * res / diag;
    }
    y = std::move(next);
    normalize(y);
    // back to the frame of W^{-1} K, unit weighted norm
    if (op.weight) {
        for (int j = 0; j < n; ++j) y[j] /= std::sqrt((*op.weight)[j]);
    }
    const double s = std::sqrt(op.inner(y, y));
    for (double& v : y) v /= s;
    return y;
}

double edge_amplitude(std::span<const double> u) {
    double m = 0.0;
    for (double v : u) m = std::max(m, std::abs(v));
    if (m == 0.0) return 0.0;
    return std::max(std::abs(u.front()), std::abs(u.back())) / m;
}

BoundState bound_state(const Slice& q, Window window) {
    const TridiagonalOperator op = discretize_schrodinger(q);
    const SpectrumResult spec = eigen_bisect(op, window);
    if (spec.eigenvalues.empty()) throw Error(ErrorKind::InvalidArgument, "no eigenvalue in the window");
    BoundState out;
    out.lambda = spec.eigenvalues.front();
    const std::vector<double> y = eigenvector(op, out.lambda);
    std::vector<double> psi(q.size(), 0.0);
    std::copy(y.begin(), y.end(), psi.begin() + 1);
    const auto peak = std::max_element(psi.begin(), psi.end(), [](double a, double b) { return std::abs(a) < std::abs(b); });
    if (*peak < 0.0) {
        for (double& v : psi) v = -v;
    }
    out.psi = Slice(q.axis, std::move(psi));
    return out;
}

Slice shoot(const Slice& q, double lambda, double psi_last, double psi_before_last) {
    const int n = q.size();
    if (n < 3) throw Error(ErrorKind::InvalidArgument, "shooting needs at least 3 nodes");
    const double c = q.axis.step * q.axis.step / 12.0;
    std::vector<double> psi(n);
    psi[n - 1] = psi_last;
    psi[n - 2] = psi_before_last;
    // psi'' = g psi, g = q - lambda
    auto g = [&](int j) { return q[j] - lambda; };
    for (int j = n - 2; j >= 1; --j) {
        psi[j - 1] = (2.0 * (1.0 + 5.0 * c * g(j)) * psi[j] - (1.0 - c * g(j + 1)) * psi[j + 1]) / (1.0 - c * g(j - 1));
    }
    return Slice(q.axis, std::move(psi));
}

// ---------------------------------------------------------------------------
// Spectrum comparison

nlohmann::json to_json(const SpectrumReport& r) {
    return nlohmann::json{{"times", r.times},
                          {"eigenvalues", r.eigenvalues},
                          {"max_pair_dev", r.max_pair_dev},
                          {"multiplicities", r.multiplicities},
                          {"raw_eigenvalues", r.raw},
                          {"paired", r.paired},
                          {"multiplicities_agree", r.multiplicities_agree},
                          {"extrapolated", r.extrapolated},
                          {"edge_amplitude", r.edge_amplitude},
                          {"message", r.message}};
}

namespace {

using OperatorOf = std::function<TridiagonalOperator(const Slice&)>;

Slice every_second(const Slice& s) {
    std::vector<double> v;
    for (int j = 0; j < s.size(); j += 2) v.push_back(s[j]);
    const Axis axis{s.axis.start, 2 * s.axis.step, static_cast<int>(v.size())};
    return Slice(axis, std::move(v));
}

SpectrumReport compare_spectra(const std::vector<Slice>& profiles, std::vector<double> times, Window window,
                               const SpectrumOptions& opt, const OperatorOf& make) {
    if (profiles.size() != times.size() || profiles.empty()) {
        throw Error(ErrorKind::InvalidArgument, "need one profile per time");
    }
    SpectrumReport rep;
    rep.times = std::move(times);
    rep.extrapolated = opt.richardson;
    for (const Slice& s : profiles) {
        const TridiagonalOperator op = make(s);
        const SpectrumResult fine = eigen_bisect(op, window, opt.tol);
        for (double lam : fine.eigenvalues) {
            rep.edge_amplitude = std::max(rep.edge_amplitude, edge_amplitude(eigenvector(op, lam)));
        }
        rep.raw.push_back(fine.eigenvalues);
        rep.multiplicities.push_back(fine.multiplicities);
        std::vector<double> used = fine.eigenvalues;
        if (opt.richardson) {
            const SpectrumResult coarse = eigen_bisect(make(every_second(s)), window, opt.tol);
            if (coarse.eigenvalues.size() == used.size()) {
                for (std::size_t k = 0; k < used.size(); ++k) used[k] += (used[k] - coarse.eigenvalues[k]) / 3.0;
            } else {
                rep.extrapolated = false;
                rep.message += "coarse spectrum count differs; raw values compared. ";
            }
        }
        rep.eigenvalues.push_back(std::move(used));
    }
    if (!rep.extrapolated) rep.eigenvalues = rep.raw;

    const double reject = 10.0 * opt.pair_tol;
    for (std::size_t a = 0; a < rep.eigenvalues.size(); ++a) {
        for (std::size_t b = a + 1; b < rep.eigenvalues.size(); ++b) {
            const auto& la = rep.eigenvalues[a];
            const auto& lb = rep.eigenvalues[b];
            if (la.size() != lb.size()) {
                rep.paired = false;
                rep.message += "eigenvalue counts differ between t=" + format_double(rep.times[a]) + " and t=" +
                               format_double(rep.times[b]) + ". ";
            }
            if (rep.multiplicities[a] != rep.multiplicities[b]) rep.multiplicities_agree = false;
            std::vector<bool> used(lb.size(), false);
            for (double x : la) {
                std::size_t best = lb.size();
                for (std::size_t k = 0; k < lb.size(); ++k) {
                    if (!used[k] && (best == lb.size() || std::abs(lb[k] - x) < std::abs(lb[best] - x))) best = k;
                }
                if (best == lb.size() || std::abs(lb[best] - x) > reject) {
                    rep.paired = false;
                    rep.message += "unpaired eigenvalue " + format_double(x) + " at t=" + format_double(rep.times[a]) + ". ";
                    continue;
                }
                used[best] = true;
                rep.max_pair_dev = std::max(rep.max_pair_dev, std::abs(lb[best] - x));
            }
        }
    }
    if (!rep.paired) rep.message = "invariance violation: " + rep.message;
    return rep;
}

int level_of(const Axis& t, double time) {
    const double j = std::round((time - t.start) / t.step);
    if (j < 0 || j >= t.size || std::abs(t.at(static_cast<int>(j)) - time) > 1e-9 * std::max(1.0, std::abs(time))) {
        throw Error(ErrorKind::InvalidArgument, "time " + format_double(time) + " is not a level of the field");
    }
    return static_cast<int>(j);
}

}  // namespace

SpectrumReport spectrum_invariance(const std::vector<Slice>& q, std::vector<double> times, Window window,
                                   const SpectrumOptions& opt) {
    return compare_spectra(q, std::move(times), window, opt, discretize_schrodinger);
}

SpectrumReport spectrum_invariance(const SampledField& q, std::vector<double> times, Window window,
                                   const SpectrumOptions& opt) {
    std::vector<Slice> rows;
    for (double t : times) rows.push_back(q.slice(level_of(q.grid().t(), t)));
    return spectrum_invariance(rows, std::move(times), window, opt);
}

SpectrumReport spectrum_invariance(const KdvSolution& q, const Axis& x, std::vector<double> times, Window window,
                                   const SpectrumOptions& opt) {
    std::vector<Slice> rows;
    for (double t : times) rows.push_back(q.sample(x, t));
    return spectrum_invariance(rows, std::move(times), window, opt);
}

// ---------------------------------------------------------------------------
// Eigenfunction transport

EigenTransport transport_eigenfunction(const KdvSolution& q, const Profile& psi0, double lambda, const Grid& grid,
                                       const TraceOptions& opt, int band) {
    EigenTransport out{transport_psi(q, psi0, grid, lambda, opt), {}, {}, 0.0, 0.0, 0.0};
    const double h = grid.h();
    const int n = grid.nx();
    double norm0 = 0.0;
    out.min_ratio = std::numeric_limits<double>::infinity();
    for (int i = 0; i < grid.nt(); ++i) {
        const auto row = out.psi.row(i);
        const Slice qs = q.sample(grid.x(), grid.t().at(i));
        const std::vector<double> psi_xx = derivative(row, h, 2);
        std::vector<double> res(n);
        for (int j = 0; j < n; ++j) res[j] = -psi_xx[j] + (qs[j] - lambda) * row[j];
        const double norm = interior_l2(row, h, band);
        if (i == 0) norm0 = norm;
        out.eigen_residual.push_back(interior_l2(res, h, band) / norm);
        out.norm_ratio.push_back(norm / norm0);
        out.max_residual = std::max(out.max_residual, out.eigen_residual.back());
        out.min_ratio = std::min(out.min_ratio, out.norm_ratio.back());
        out.max_ratio = std::max(out.max_ratio, out.norm_ratio.back());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Impedance

nlohmann::json to_json(const ConjugationReport& r) {
    return nlohmann::json{{"x_min", r.axis.start},
                          {"x_max", r.axis.last()},
                          {"nx", r.axis.size},
                          {"residual", r.residual},
                          {"residual_over_h2", r.residual_over_h2},
                          {"battery", r.battery},
                          {"seed", r.seed},
                          {"t_spectrum", r.t_spectrum},
                          {"l_spectrum", r.l_spectrum},
                          {"spectrum_dev", r.spectrum_dev},
                          {"edge_amplitude", r.edge_amplitude}};
}

ConjugationReport impedance_conjugation(const Slice& r_full, const ConjugationOptions& opt) {
    const Slice r = impedance_window(r_full, opt.rho_range);
    const TridiagonalOperator t_op = discretize_impedance(r);
    const TridiagonalOperator l_op = discretize_schrodinger(miura_map(r));
    const std::vector<double> p = log_rho(r);
    const int n = t_op.size();
    const Axis& ax = t_op.axis;

    ConjugationReport rep;
    rep.axis = r.axis;
    rep.battery = opt.battery;
    rep.seed = opt.seed;
    std::mt19937_64 rng(opt.seed);
    const double mid = 0.5 * (ax.start + ax.last()), len = ax.last() - ax.start;
    std::uniform_real_distribution<double> centre(mid - 0.3 * len, mid + 0.3 * len), width(0.5, 2.0),
        wave(0.0, 3.0), phase(0.0, 2.0 * M_PI);
    for (int m = 0; m < opt.battery; ++m) {
        const double c = centre(rng), w = width(rng), k = wave(rng), ph = phase(rng);
        std::vector<double> u(n), rho_u(n);
        for (int j = 0; j < n; ++j) {
            const double y = (ax.at(j) - c) / w;
            u[j] = std::exp(-y * y) * std::cos(k * ax.at(j) + ph);
            rho_u[j] = std::exp(p[j + 1]) * u[j];
        }
        const std::vector<double> tu = t_op.apply(u);
        const std::vector<double> l_rho_u = l_op.apply(rho_u);
        std::vector<double> diff(n);
        for (int j = 0; j < n; ++j) diff[j] = std::exp(p[j + 1]) * tu[j] - l_rho_u[j];
        const double norm = sum_sq(rho_u);
        if (norm > 0.0) rep.residual = std::max(rep.residual, std::sqrt(sum_sq(diff) / norm));
    }
    rep.residual_over_h2 = rep.residual / (t_op.h * t_op.h);

    const SpectrumResult ts = eigen_bisect(t_op, opt.window, opt.tol);
    const SpectrumResult ls = eigen_bisect(l_op, Window{opt.window.lo - 1e-3, opt.window.hi + 1e-3}, opt.tol);
    rep.t_spectrum = ts.eigenvalues;
    rep.l_spectrum = ls.eigenvalues;
    std::vector<bool> used(ls.eigenvalues.size(), false);
    for (double x : ts.eigenvalues) {
        rep.edge_amplitude = std::max(rep.edge_amplitude, edge_amplitude(eigenvector(t_op, x)));
        std::size_t best = used.size();
        for (std::size_t k = 0; k < used.size(); ++k) {
            if (!used[k] && (best == used.size() || std::abs(ls.eigenvalues[k] - x) < std::abs(ls.eigenvalues[best] - x))) {
                best = k;
            }
        }
        if (best == used.size()) {
            rep.spectrum_dev = std::numeric_limits<double>::infinity();
            break;
        }
        used[best] = true;
        rep.spectrum_dev = std::max(rep.spectrum_dev, std::abs(ls.eigenvalues[best] - x));
    }
    return rep;
}

SpectrumReport impedance_invariance(const SampledField& r, std::vector<double> times, Window window,
                                    const SpectrumOptions& opt, double rho_range) {
    std::vector<Slice> rows;
    for (double t : times) rows.push_back(impedance_window(r.slice(level_of(r.grid().t(), t)), rho_range));
    return compare_spectra(rows, std::move(times), window, opt, discretize_impedance);
}

// ---------------------------------------------------------------------------
// Lax evolution

namespace {

std::vector<Complex> to_complex(std::span<const double> v) { return std::vector<Complex>(v.begin(), v.end()); }

std::vector<double> real_part(const std::vector<Complex>& v) {
    std::vector<double> out(v.size());
    for (std::size_t j = 0; j < v.size(); ++j) out[j] = v[j].real();
    return out;
}

void require_periodic_data(const Slice& psi0) {
    if (!is_power_of_two(psi0.size())) throw Error(ErrorKind::InvalidArgument, "axis size must be a power of two");
    if (edge_amplitude(psi0.values) > 1e-12) {
        throw Error(ErrorKind::InvalidArgument, "initial data does not decay at the window edges");
    }
}

}  // namespace

FreeEvolution lax_evolution_free(const Slice& psi0, double t) {
    require_periodic_data(psi0);
    const int n = psi0.size();
    const std::vector<double> k = wavenumbers(n, psi0.axis.step);
    std::vector<Complex> f = to_complex(psi0.values);
    fft(f);
    for (int j = 0; j < n; ++j) f[j] *= std::polar(1.0, 4.0 * k[j] * k[j] * k[j] * t);
    fft(f, true);
    FreeEvolution out{Slice(psi0.axis, real_part(f)), 1.0};
    out.norm_ratio = std::sqrt(sum_sq(out.psi.values) / sum_sq(psi0.values));
    return out;
}

LaxConjugation lax_conjugation_check(const KdvSolution& q, const Slice& psi0, double t_end, int steps) {
    require_periodic_data(psi0);
    const int n = psi0.size();
    const double h = psi0.axis.step;
    const std::vector<double> k = wavenumbers(n, h);
    const std::vector<double> x = psi0.axis.nodes();

    std::vector<double> qv(n), qxv(n);
    auto sample_q = [&](double t) { q.eval(t, x, qv, qxv); };

    double q_max = 0.0, qx_max = 0.0;
    for (double t : {0.0, 0.5 * t_end, t_end}) {
        sample_q(t);
        for (int j = 0; j < n; ++j) {
            q_max = std::max(q_max, std::abs(qv[j]));
            qx_max = std::max(qx_max, std::abs(qxv[j]));
        }
        if (edge_amplitude(qv) > 0.0 && std::max(std::abs(qv.front()), std::abs(qv.back())) > 1e-8) {
            throw Error(ErrorKind::InvalidArgument, "q does not decay at the window edges");
        }
    }
    if (steps <= 0) {
        const double k_max = M_PI / h;
        const double rate = 6.0 * q_max * k_max + 3.0 * qx_max;
        const double dt_max = rate > 0.0 ? std::min(2.0 / rate, 1e-3) : 1e-3;
        steps = std::max(1, static_cast<int>(std::ceil(std::abs(t_end) / dt_max)));
    }
    const double dt = t_end / steps;

    // L psi = -psi'' + q psi through the spectral second derivative
    auto apply_l = [&](const std::vector<Complex>& hat, double t) {
        std::vector<Complex> f(hat);
        for (int j = 0; j < n; ++j) f[j] *= k[j] * k[j];
        fft(f, true);
        sample_q(t);
        std::vector<Complex> g = hat;
        fft(g, true);
        for (int j = 0; j < n; ++j) f[j] += qv[j] * g[j].real();
        return real_part(f);
    };
    auto disp = [&](double t, int j) { return std::polar(1.0, 4.0 * k[j] * k[j] * k[j] * t); };

    // v = exp(-4 i k^3 t) psi_hat; v_t = exp(-4 i k^3 t) FFT(6 q psi_x + 3 q_x psi)
    auto rhs = [&](double t, const std::vector<Complex>& v) {
        std::vector<Complex> psi(n), dpsi(n);
        for (int j = 0; j < n; ++j) {
            psi[j] = disp(t, j) * v[j];
            dpsi[j] = Complex(0.0, k[j]) * psi[j];
        }
        fft(psi, true);
        fft(dpsi, true);
        sample_q(t);
        std::vector<Complex> nl(n);
        for (int j = 0; j < n; ++j) nl[j] = 6.0 * qv[j] * dpsi[j].real() + 3.0 * qxv[j] * psi[j].real();
        fft(nl);
        for (int j = 0; j < n; ++j) nl[j] *= disp(-t, j);
        return nl;
    };
    auto evolve = [&](std::vector<Complex> v) {
        std::vector<Complex> tmp(n);
        for (int s = 0; s < steps; ++s) {
            const double t = s * dt;
            const auto k1 = rhs(t, v);
            for (int j = 0; j < n; ++j) tmp[j] = v[j] + 0.5 * dt * k1[j];
            const auto k2 = rhs(t + 0.5 * dt, tmp);
            for (int j = 0; j < n; ++j) tmp[j] = v[j] + 0.5 * dt * k2[j];
            const auto k3 = rhs(t + 0.5 * dt, tmp);
            for (int j = 0; j < n; ++j) tmp[j] = v[j] + dt * k3[j];
            const auto k4 = rhs(t + dt, tmp);
            for (int j = 0; j < n; ++j) v[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        for (int j = 0; j < n; ++j) v[j] *= disp(t_end, j);
        return v;  // psi_hat at t_end
    };

    std::vector<Complex> hat0 = to_complex(psi0.values);
    fft(hat0);
    std::vector<Complex> l_hat0 = to_complex(apply_l(hat0, 0.0));
    fft(l_hat0);

    const std::vector<Complex> psi_hat = evolve(hat0);
    std::vector<Complex> v_hat = evolve(l_hat0);
    fft(v_hat, true);
    const std::vector<double> lhs = real_part(v_hat);     // Psi(t) L(0) psi0
    const std::vector<double> rhs_v = apply_l(psi_hat, t_end);  // L(t) Psi(t) psi0

    std::vector<Complex> psi_t(psi_hat);
    fft(psi_t, true);
    const std::vector<double> psi_end = real_part(psi_t);

    LaxConjugation out;
    out.steps = steps;
    const double norm0 = sum_sq(psi0.values);
    out.norm_ratio = std::sqrt(sum_sq(psi_end) / norm0);
    if (!std::isfinite(out.norm_ratio) || out.norm_ratio > 1e3) {
        throw Error(ErrorKind::Numerical, "Lax evolution blew up; use more steps");
    }
    std::vector<double> diff(n);
    for (int j = 0; j < n; ++j) diff[j] = lhs[j] - rhs_v[j];
    out.residual = std::sqrt(sum_sq(diff) / norm0);
    return out;
}

}  // namespace qlp
