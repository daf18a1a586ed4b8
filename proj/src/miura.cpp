#include "qlpair/miura.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace qlp {

Slice miura_map(const Slice& r) {
    Slice out = deriv_x(r, 1);
    for (int j = 0; j < r.size(); ++j) out.values[j] += r[j] * r[j];
    return out;
}

SampledField miura_map(const SampledField& r) {
    SampledField out = deriv_x(r, 1);
    for (int i = 0; i < r.nt(); ++i) {
        for (int j = 0; j < r.nx(); ++j) out(i, j) += r(i, j) * r(i, j);
    }
    return out;
}

Slice log_psi_initial(const Slice& r0) { return integrate_x(r0); }

Slice psi_initial(const Slice& r0) {
    Slice p = log_psi_initial(r0);
    for (double& v : p.values) v = std::exp(v);
    return p;
}

SampledField transport_psi(const KdvSolution& q, const Profile& psi0, const Grid& grid, double lambda,
                           const TraceOptions& opt) {
    return solve_first_order(q.transport_coefficients(lambda), psi0, grid, opt);
}

SampledField transport_log_psi(const KdvSolution& q, const Profile& log_psi0, const Grid& grid,
                               double lambda, const TraceOptions& opt) {
    const FootTable feet = trace_feet(q.transport_coefficients(lambda), grid, opt);
    SampledField p(grid);
    for (int i = 0; i < grid.nt(); ++i) {
        for (int j = 0; j < grid.nx(); ++j) p(i, j) = log_psi0(feet.foot(i, j)) + feet.integral(i, j);
    }
    return p;
}

nlohmann::json to_json(const PipelineDiagnostics& d) {
    nlohmann::json j;
    j["gate_deviation"] = d.gate_deviation;
    j["min_psi"] = d.min_psi;
    j["kernel_residual"] = d.kernel_residual;
    j["kernel_residual_relative"] = d.kernel_residual_relative;
    j["mkdv_residual"] = d.mkdv_residual ? nlohmann::json(*d.mkdv_residual) : nlohmann::json(nullptr);
    j["wronskian_drift"] = d.wronskian_drift ? nlohmann::json(*d.wronskian_drift) : nlohmann::json(nullptr);
    return j;
}

SampledField PipelineResult::psi() const {
    SampledField out = log_psi;
    for (int i = 0; i < out.nt(); ++i) {
        for (double& v : out.row(i)) v = std::exp(v);
    }
    return out;
}

namespace {

constexpr double kGateStep = 0.005;
constexpr double kOverflowLog = 300.0;
constexpr int kMargin = 3;

double gate_deviation(const Profile& r0, const KdvSolution& q, const Grid& grid, double lambda) {
    Axis axis = grid.x();
    if (r0.sampled()) {
        axis = r0.samples().axis;
    } else if (grid.h() > kGateStep) {
        // closed-form data: check the fiber at a resolution where the
        // difference error of r0' is far below the gate tolerance
        const int n = static_cast<int>(std::ceil((axis.last() - axis.start) / kGateStep)) + 1;
        axis = Axis::snapped(axis.start, axis.last(), n);
    }
    const Slice r = r0.on(axis);
    const Slice b = miura_map(r);
    const double t0 = grid.t().start;
    double dev = 0.0;
    for (int j = 0; j < axis.size; ++j) {
        const double x = axis.at(j);
        if (q.domain() && !q.domain()->contains(t0, x)) continue;
        dev = std::max(dev, std::abs(b[j] - (q.q(t0, x) - lambda)));
    }
    return dev;
}

// Axis that contains x = 0, the grid and every foot.
Axis foot_axis(const Grid& grid, const FootTable& feet) {
    double lo = grid.x().start;
    double hi = grid.x().last();
    for (double v : feet.foot.values()) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double h = grid.h();
    const int left = static_cast<int>(std::ceil((grid.x().start - lo) / h)) + 4;
    const int right = static_cast<int>(std::ceil((hi - grid.x().last()) / h)) + 4;
    Axis axis = grid.x().extended(left, right);
    if (!axis.zero_index()) {
        throw Error(ErrorKind::InvalidArgument, "initial data axis needs x = 0 as a node");
    }
    return axis;
}

// 8-point Gauss-Legendre on [a, b].
template <class F>
double gauss8(const F& f, double a, double b) {
    static constexpr double node[4] = {0.1834346424956498, 0.5255324099163290, 0.7966664774136267,
                                       0.9602898564975363};
    static constexpr double weight[4] = {0.3626837833783620, 0.3137066458778873, 0.2223810344533745,
                                         0.1012285362903763};
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    double acc = 0.0;
    for (int k = 0; k < 4; ++k) acc += weight[k] * (f(mid - half * node[k]) + f(mid + half * node[k]));
    return acc * half;
}

// log psi0 = int_0^y r0 at arbitrary y. Closed-form data is integrated by
// Gauss-Legendre, so the result is smooth in y and survives the high
// derivatives taken later; samples fall back to interpolation.
class InitialPrimitive {
public:
    InitialPrimitive(const Profile& r0, const Axis& axis) : r0_(r0), axis_(axis) {
        if (r0.sampled()) {
            sampled_ = log_psi_initial(r0.samples());
            return;
        }
        nodal_.assign(axis.size, 0.0);
        const int j0 = *axis.zero_index();
        auto f = [this](double x) { return r0_(x); };
        for (int j = j0 + 1; j < axis.size; ++j) nodal_[j] = nodal_[j - 1] + gauss8(f, axis.at(j - 1), axis.at(j));
        for (int j = j0 - 1; j >= 0; --j) nodal_[j] = nodal_[j + 1] - gauss8(f, axis.at(j), axis.at(j + 1));
    }

    double operator()(double y) const {
        if (sampled_) return interpolate(*sampled_, y);
        const int j = std::clamp(static_cast<int>(std::lround((y - axis_.start) / axis_.step)), 0, axis_.size - 1);
        return nodal_[j] + gauss8([this](double x) { return r0_(x); }, axis_.at(j), y);
    }

    /// Nodal values on the axis.
    Slice nodes() const {
        if (sampled_) return *sampled_;
        return Slice{axis_, nodal_};
    }

private:
    const Profile& r0_;
    Axis axis_;
    std::vector<double> nodal_;
    std::optional<Slice> sampled_;
};

}  // namespace

PipelineResult invert_miura_flow(const Profile& r0, const KdvSolution& q, const Grid& grid,
                                 const PipelineOptions& opt) {
    const double lambda = opt.lambda;
    PipelineDiagnostics diag;
    diag.gate_deviation = gate_deviation(r0, q, grid, lambda);
    if (!(diag.gate_deviation <= opt.gate_tol)) {
        throw Error(ErrorKind::MiuraGate,
                    "initial data not Miura-compatible with q: max |r0' + r0^2 - q(t0)| = " +
                        format_double(diag.gate_deviation) + " > " + format_double(opt.gate_tol));
    }

    // trace a few nodes past each edge when q allows it, so that r and
    // p_xx are centrally differenced on every output node
    const Axis wide = grid.x().extended(kMargin, kMargin);
    const bool padded = !q.domain() || (q.domain()->x_lo <= wide.start && q.domain()->x_hi >= wide.last());
    const int m = padded ? kMargin : 0;
    const Grid work = padded ? Grid(wide, grid.t()) : grid;

    const FootTable feet = trace_feet(q.transport_coefficients(lambda), work, opt.trace);
    const InitialPrimitive p0(r0, r0.sampled() ? r0.samples().axis : foot_axis(work, feet));

    SampledField p_work(work);
    for (int i = 0; i < work.nt(); ++i) {
        for (int j = 0; j < work.nx(); ++j) p_work(i, j) = p0(feet.foot(i, j)) + feet.integral(i, j);
    }
    p_work.require_finite("log psi");
    const SampledField r_work = deriv_x(p_work, 1);
    const SampledField pxx_work = deriv_x(p_work, 2);

    SampledField p(grid), r(grid), pxx(grid);
    for (int i = 0; i < grid.nt(); ++i) {
        for (int j = 0; j < grid.nx(); ++j) {
            p(i, j) = p_work(i, j + m);
            r(i, j) = r_work(i, j + m);
            pxx(i, j) = pxx_work(i, j + m);
        }
    }
    SampledField qs = q.sample(grid);

    diag.min_psi = std::numeric_limits<double>::infinity();
    double p_max = -std::numeric_limits<double>::infinity();
    double p_min = std::numeric_limits<double>::infinity();
    for (int i = 0; i < grid.nt(); ++i) {
        for (int j = 0; j < grid.nx(); ++j) {
            p_max = std::max(p_max, p(i, j));
            p_min = std::min(p_min, p(i, j));
            diag.min_psi = std::min(diag.min_psi, std::exp(p(i, j)));
            if (j < kBoundaryNodes || j >= grid.nx() - kBoundaryNodes) continue;
            const double rel = std::abs(qs(i, j) - lambda - pxx(i, j) - r(i, j) * r(i, j));
            diag.kernel_residual_relative = std::max(diag.kernel_residual_relative, rel);
            diag.kernel_residual = std::max(diag.kernel_residual, rel * std::exp(p(i, j)));
        }
    }
    if (grid.nt() >= 6 && lambda == 0.0) diag.mkdv_residual = mkdv_residual(r).interior_max;

    PipelineResult out{std::move(qs), std::move(p), std::move(r), diag, std::nullopt};

    if (opt.wronskian && p_max < kOverflowLog && p_min > -kOverflowLog) {
        // phi0 = psi0 int_0^x psi0^-2 rides the same characteristics, so
        // phi / psi = G(foot) with G = int_0^y exp(-2 p0)
        Slice weight = p0.nodes();
        for (double& v : weight.values) v = std::exp(-2.0 * v);
        const Slice G = integrate_x(weight);
        SampledField ratio(grid);
        for (int i = 0; i < grid.nt(); ++i) {
            for (int j = 0; j < grid.nx(); ++j) ratio(i, j) = interpolate(G, feet.foot(i, j + m));
        }
        SampledField psi = out.psi();
        SampledField phi = psi;
        for (std::size_t k = 0; k < phi.values().size(); ++k) {
            phi(static_cast<int>(k / grid.nx()), static_cast<int>(k % grid.nx())) *= ratio.values()[k];
        }
        out.diagnostics.wronskian_drift = wronskian(phi, psi).drift;
        out.phi_over_psi = std::move(ratio);
    }
    return out;
}

PipelineResult invert_miura_flow(const Slice& r0, const SampledField& q, const Axis& x_out,
                                 const PipelineOptions& opt) {
    return invert_miura_flow(Profile(r0), KdvSolution::from_samples(q), Grid(x_out, q.grid().t()), opt);
}

RhoCheck rho_crosscheck(const SampledField& r, const SampledField& log_psi) {
    const Grid& g = r.grid();
    auto j0 = g.x().zero_index();
    if (!j0) throw Error(ErrorKind::InvalidArgument, "rho cross-check needs x = 0 as a node");
    if (g.nt() < 4) throw Error(ErrorKind::Stencil, "rho cross-check needs at least 4 time levels");
    const SampledField rxx = deriv_x(r, 2);
    std::vector<double> f(g.nt());
    for (int i = 0; i < g.nt(); ++i) {
        const double v = r(i, *j0);
        f[i] = 2.0 * v * v * v - rxx(i, *j0);
    }
    RhoCheck out{SampledField(g), primitive(f, g.dt(), 0), 0.0};
    for (int i = 0; i < g.nt(); ++i) {
        const auto prim = primitive(r.row(i), g.h(), *j0);
        for (int j = 0; j < g.nx(); ++j) {
            out.log_rho(i, j) = out.log_rho0[i] + prim[j];
            out.max_dev = std::max(out.max_dev, std::abs(std::expm1(out.log_rho(i, j) - log_psi(i, j))));
        }
    }
    return out;
}

WronskianReport wronskian(const SampledField& phi, const SampledField& psi) {
    if (!same_axis(phi.grid().x(), psi.grid().x()) || !same_axis(phi.grid().t(), psi.grid().t())) {
        throw Error(ErrorKind::InvalidArgument, "wronskian needs both fields on one grid");
    }
    const Grid& g = psi.grid();
    const SampledField phi_x = deriv_x(phi, 1);
    const SampledField psi_x = deriv_x(psi, 1);
    WronskianReport out{SampledField(g), 0.0, 0.0};
    for (int i = 0; i < g.nt(); ++i) {
        for (int j = 0; j < g.nx(); ++j) out.w(i, j) = phi(i, j) * psi_x(i, j) - psi(i, j) * phi_x(i, j);
    }
    const int j0 = g.x().zero_index().value_or(g.nx() / 2);
    out.reference = out.w(0, j0);
    const double scale = std::max(1.0, std::abs(out.reference));
    for (double v : out.w.values()) out.drift = std::max(out.drift, std::abs(v - out.reference) / scale);
    return out;
}

double interior_l2(std::span<const double> f, double h, int band) {
    const int n = static_cast<int>(f.size());
    if (2 * band >= n) return 0.0;
    return l2_norm(f.subspan(band, n - 2 * band), h);
}

namespace {

constexpr int kNestedBand = 8;

std::vector<double> d(const std::vector<double>& f, double h, int order) { return derivative(f, h, order); }

}  // namespace

std::vector<CommutatorReport> commutator_check(const SampledField& q, const Slice& testfn,
                                               const std::vector<double>& lambdas) {
    const Grid& g = q.grid();
    if (!same_axis(g.x(), testfn.axis)) {
        throw Error(ErrorKind::InvalidArgument, "test function must live on q's x-axis");
    }
    const double h = g.h();
    const int n = g.nx();
    const SampledField qt = deriv_t(q, 1);
    const SampledField qx_f = deriv_x(q, 1);
    const SampledField qxxx_f = deriv_x(q, 3);
    const std::vector<double>& phi = testfn.values;
    const std::vector<double> phi_x = d(phi, h, 1);
    const std::vector<double> phi_xx = d(phi, h, 2);
    const double phi_norm = interior_l2(phi, h, kNestedBand);

    std::vector<CommutatorReport> reports;
    for (double lambda : lambdas) {
        CommutatorReport rep{lambda, 0.0, 0.0, 0.0};
        for (int i = kBoundaryLevels; i < g.nt() - kBoundaryLevels; ++i) {
            std::vector<double> Lphi(n), Qphi(n);
            for (int j = 0; j < n; ++j) {
                Lphi[j] = -phi_xx[j] + (q(i, j) - lambda) * phi[j];
                Qphi[j] = (4 * lambda + 2 * q(i, j)) * phi_x[j] - qx_f(i, j) * phi[j];
            }
            const auto Lphi_x = d(Lphi, h, 1);
            const auto Qphi_xx = d(Qphi, h, 2);
            std::vector<double> ident(n), lax(n), kdv(n);
            for (int j = 0; j < n; ++j) {
                const double QL = (4 * lambda + 2 * q(i, j)) * Lphi_x[j] - qx_f(i, j) * Lphi[j];
                const double LQ = -Qphi_xx[j] + (q(i, j) - lambda) * Qphi[j];
                const double rhs = QL - LQ + 4 * qx_f(i, j) * Lphi[j];
                const double lhs = qt(i, j) * phi[j];
                kdv[j] = (qt(i, j) - 6 * q(i, j) * qx_f(i, j) + qxxx_f(i, j)) * phi[j];
                lax[j] = lhs - rhs;
                ident[j] = lhs - rhs - kdv[j];
            }
            rep.identity_residual = std::max(rep.identity_residual, interior_l2(ident, h, kNestedBand) / phi_norm);
            rep.lax_residual = std::max(rep.lax_residual, interior_l2(lax, h, kNestedBand) / phi_norm);
            rep.kdv_term_norm = std::max(rep.kdv_term_norm, interior_l2(kdv, h, kNestedBand) / phi_norm);
        }
        reports.push_back(rep);
    }
    return reports;
}

double factorization_check(const Slice& q, double lambda, const Slice& testfn) {
    if (!same_axis(q.axis, testfn.axis)) {
        throw Error(ErrorKind::InvalidArgument, "test function must live on q's axis");
    }
    const double h = q.axis.step;
    const int n = q.size();
    const auto qx = d(q.values, h, 1);
    const auto phi_x = d(testfn.values, h, 1);
    const auto phi_xx = d(testfn.values, h, 2);
    const auto phi_xxx = d(phi_xx, h, 1);
    std::vector<double> Lphi(n);
    for (int j = 0; j < n; ++j) Lphi[j] = -phi_xx[j] + (q[j] - lambda) * testfn[j];
    const auto Lphi_x = d(Lphi, h, 1);
    std::vector<double> diff(n);
    for (int j = 0; j < n; ++j) {
        // the third derivative is nested like the factored form, so q = 0
        // reduces both sides to the same expression
        const double A = -4 * phi_xxx[j] + 6 * q[j] * phi_x[j] + 3 * qx[j] * testfn[j];
        const double Q = (4 * lambda + 2 * q[j]) * phi_x[j] - qx[j] * testfn[j];
        diff[j] = A - (Q + 4 * Lphi_x[j]);
    }
    return interior_l2(diff, h, kNestedBand) / interior_l2(testfn.values, h, kNestedBand);
}

}  // namespace qlp
