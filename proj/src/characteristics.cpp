#include "qlpair/characteristics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace qlp {

std::optional<Region> intersect(const std::optional<Region>& a, const std::optional<Region>& b) {
    if (!a) return b;
    if (!b) return a;
    return Region{std::max(a->t_lo, b->t_lo), std::min(a->t_hi, b->t_hi),
                  std::max(a->x_lo, b->x_lo), std::min(a->x_hi, b->x_hi)};
}

SpaceTimeFunction::SpaceTimeFunction(Fn f) : f_(std::move(f)) {}

SpaceTimeFunction::SpaceTimeFunction(BicubicField field)
    : field_(std::make_shared<const BicubicField>(std::move(field))) {
    const Grid& g = field_->field().grid();
    domain_ = Region{g.t().start, g.t().last(), g.x().start, g.x().last()};
    auto held = field_;
    f_ = [held](double t, double x) { return (*held)(t, x); };
}

SpaceTimeFunction SpaceTimeFunction::constant(double c) {
    return SpaceTimeFunction([c](double, double) { return c; });
}

namespace {

CoefficientPair::Batch pointwise(CoefficientPair::Joint joint) {
    return [joint = std::move(joint)](double t, std::span<const double> x, std::span<double> a,
                                      std::span<double> b) {
        for (std::size_t k = 0; k < x.size(); ++k) joint(t, x[k], a[k], b[k]);
    };
}

}  // namespace

CoefficientPair::CoefficientPair(SpaceTimeFunction a, SpaceTimeFunction b)
    : domain_(intersect(a.domain(), b.domain())) {
    joint_ = [a = std::move(a), b = std::move(b)](double t, double x, double& av, double& bv) {
        av = a(t, x);
        bv = b(t, x);
    };
    batch_ = pointwise(joint_);
}

CoefficientPair::CoefficientPair(Joint joint, std::optional<Region> domain)
    : joint_(std::move(joint)), batch_(pointwise(joint_)), domain_(domain) {}

CoefficientPair::CoefficientPair(Joint joint, Batch batch, std::optional<Region> domain)
    : joint_(std::move(joint)), batch_(std::move(batch)), domain_(domain) {}

double CoefficientPair::a(double t, double x) const {
    double av = 0.0;
    double bv = 0.0;
    joint_(t, x, av, bv);
    return av;
}

Profile::Profile(std::function<double(double)> f) : f_(std::move(f)) {}

Profile::Profile(Slice samples) : samples_(std::move(samples)) {}

double Profile::operator()(double x) const {
    if (samples_) return interpolate(*samples_, x);
    return f_(x);
}

Slice Profile::on(const Axis& axis) const {
    if (samples_ && same_axis(samples_->axis, axis)) return *samples_;
    std::vector<double> v(axis.size);
    for (int j = 0; j < axis.size; ++j) v[j] = (*this)(axis.at(j));
    return Slice(axis, std::move(v));
}

int substeps_for(double dt, const TraceOptions& opt) {
    if (opt.substeps > 0) return opt.substeps;
    return std::max(1, static_cast<int>(std::ceil(std::abs(dt) / opt.max_step - 1e-9)));
}

// ---------------------------------------------------------------------------
// Tracing

PathPoint trace_path(const CoefficientPair& c, double t_from, double x0, double t_to, int substeps) {
    if (substeps < 1) throw Error(ErrorKind::InvalidArgument, "trace needs substeps >= 1");
    const double dt = (t_to - t_from) / substeps;
    const auto& dom = c.domain();
    auto eval = [&](double t, double x, double& a, double& b) {
        if (dom && !dom->contains(t, x)) {
            throw DomainEscapeError("characteristic left the coefficient domain at t = " +
                                        format_double(t) + ", x = " + format_double(x),
                                    {{-1, -1, t}});
        }
        c(t, x, a, b);
    };
    double x = x0;
    double integral = 0.0;
    double a1, b1, a2, b2, a3, b3, a4, b4;
    for (int s = 0; s < substeps; ++s) {
        const double t = t_from + s * dt;
        eval(t, x, a1, b1);
        eval(t + 0.5 * dt, x - 0.5 * dt * a1, a2, b2);
        eval(t + 0.5 * dt, x - 0.5 * dt * a2, a3, b3);
        eval(t + dt, x - dt * a3, a4, b4);
        x -= dt / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4);
        integral += dt / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4);
    }
    return {x, integral};
}

double trace(const CoefficientPair& c, double t_from, double x0, double t_to, int substeps) {
    return trace_path(c, t_from, x0, t_to, substeps).x;
}

double trace(const SpaceTimeFunction& a, double t_from, double x0, double t_to, int substeps) {
    return trace(CoefficientPair(a, SpaceTimeFunction::constant(0.0)), t_from, x0, t_to, substeps);
}

FootTable trace_feet(const CoefficientPair& c, const Grid& grid, const TraceOptions& opt) {
    if (opt.enforce_padding) check_padding(c, grid);
    if (opt.check_growth) {
        const double span = grid.x().last() - grid.x().start;
        Region window{grid.t().start, grid.t().last(), grid.x().start - span, grid.x().last() + span};
        check_linear_growth(c, intersect(window, c.domain()).value());
    }
    FootTable out{grid, SampledField(grid), SampledField(grid)};
    const double t0 = grid.t().start;
    const int nx = grid.nx();
    const auto& dom = c.domain();
    std::vector<DomainEscapeError::Node> escaped;
    // every node of a row shares the step sequence, so the row is advanced
    // as one batch; escaped nodes are frozen and reported at the end
    std::vector<double> x(nx), shift(nx), integral(nx), stage(nx), pos(nx), a(nx), b(nx), dx(nx), di(nx);
    std::vector<char> alive(nx);
    std::vector<double> exit_time(nx);
    for (int j = 0; j < nx; ++j) out.foot(0, j) = grid.x().at(j);
    for (int i = 1; i < grid.nt(); ++i) {
        const double t_start = grid.t().at(i);
        const int n = substeps_for(t_start - t0, opt);
        const double dt = (t0 - t_start) / n;
        for (int j = 0; j < nx; ++j) {
            x[j] = grid.x().at(j);
            shift[j] = 0.0;
            integral[j] = 0.0;
            alive[j] = 1;
        }
        auto eval = [&](double t, const std::vector<double>& pos) {
            if (dom) {
                // accumulated step times may round just past the window
                const double tc = std::clamp(t, dom->t_lo, dom->t_hi);
                for (int j = 0; j < nx; ++j) {
                    if (alive[j] && !dom->contains(tc, pos[j])) {
                        alive[j] = 0;
                        exit_time[j] = t;
                    }
                }
                for (int j = 0; j < nx; ++j) {
                    if (!alive[j]) stage[j] = std::clamp(x[j], dom->x_lo, dom->x_hi);
                    else stage[j] = pos[j];
                }
                c(tc, stage, a, b);
            } else {
                c(t, pos, a, b);
            }
        };
        for (int s = 0; s < n; ++s) {
            const double t = t_start + s * dt;
            eval(t, x);
            for (int j = 0; j < nx; ++j) {
                dx[j] = a[j];
                di[j] = b[j];
                pos[j] = x[j] - 0.5 * dt * a[j];
            }
            eval(t + 0.5 * dt, pos);
            for (int j = 0; j < nx; ++j) {
                dx[j] += 2 * a[j];
                di[j] += 2 * b[j];
                pos[j] = x[j] - 0.5 * dt * a[j];
            }
            eval(t + 0.5 * dt, pos);
            for (int j = 0; j < nx; ++j) {
                dx[j] += 2 * a[j];
                di[j] += 2 * b[j];
                pos[j] = x[j] - dt * a[j];
            }
            eval(t + dt, pos);
            // the displacement is accumulated separately from the start
            // node: it is small, so rounding stays far below |x| eps
            for (int j = 0; j < nx; ++j) {
                shift[j] -= dt / 6.0 * (dx[j] + a[j]);
                integral[j] += dt / 6.0 * (di[j] + b[j]);
                x[j] = grid.x().at(j) + shift[j];
            }
        }
        for (int j = 0; j < nx; ++j) {
            if (!alive[j]) {
                escaped.push_back({i, j, exit_time[j]});
                continue;
            }
            out.foot(i, j) = x[j];
            out.integral(i, j) = -integral[j];
        }
    }
    if (!escaped.empty()) {
        const auto& first = escaped.front();
        std::string what = std::to_string(escaped.size()) +
                           " backward characteristics left the coefficient domain; first from (t, x) = (" +
                           format_double(grid.t().at(first.time_index)) + ", " +
                           format_double(grid.x().at(first.space_index)) + ") at t = " +
                           format_double(first.exit_time);
        throw DomainEscapeError(std::move(what), std::move(escaped));
    }
    return out;
}

SampledField solve_first_order(const CoefficientPair& c, const Profile& u0, const Grid& grid,
                               const TraceOptions& opt) {
    const FootTable feet = trace_feet(c, grid, opt);
    SampledField u(grid);
    for (int i = 0; i < grid.nt(); ++i) {
        for (int j = 0; j < grid.nx(); ++j) {
            u(i, j) = u0(feet.foot(i, j)) * std::exp(feet.integral(i, j));
        }
    }
    u.require_finite("solve_first_order");
    return u;
}

SampledField solve_inhomogeneous(const SpaceTimeFunction& a, const SpaceTimeFunction& eta,
                                 const Profile& s0, const Grid& grid, const TraceOptions& opt) {
    const FootTable feet = trace_feet(CoefficientPair(a, eta), grid, opt);
    SampledField s(grid);
    for (int i = 0; i < grid.nt(); ++i) {
        for (int j = 0; j < grid.nx(); ++j) s(i, j) = s0(feet.foot(i, j)) + feet.integral(i, j);
    }
    s.require_finite("solve_inhomogeneous");
    return s;
}

// ---------------------------------------------------------------------------
// Forward table and Jacobian

CharacteristicTable characteristic_table(const CoefficientPair& c, const Grid& grid,
                                         const TraceOptions& opt) {
    CharacteristicTable table{grid.t().start, grid, SampledField(grid), SampledField(grid)};
    for (int j = 0; j < grid.nx(); ++j) {
        double x = grid.x().at(j);
        double integral = 0.0;
        table.xi(0, j) = x;
        table.xi_x(0, j) = 1.0;
        for (int i = 1; i < grid.nt(); ++i) {
            const double t_prev = grid.t().at(i - 1);
            const double t = grid.t().at(i);
            const PathPoint p = trace_path(c, t_prev, x, t, substeps_for(t - t_prev, opt));
            x = p.x;
            integral += p.integral;
            table.xi(i, j) = x;
            table.xi_x(i, j) = std::exp(-integral);
        }
    }
    return table;
}

SampledField jacobian_fd(const CharacteristicTable& table) { return deriv_x(table.xi, 1); }

JacobianCheck compare_jacobians(const CharacteristicTable& table, double tol) {
    JacobianCheck out{table.xi_x, jacobian_fd(table), 0.0, true};
    for (int i = 0; i < table.grid.nt(); ++i) {
        for (int j = 0; j < table.grid.nx(); ++j) {
            out.max_deviation = std::max(
                out.max_deviation, std::abs(out.formula(i, j) - out.finite_difference(i, j)));
        }
    }
    out.consistent = out.max_deviation <= 100.0 * tol;
    return out;
}

void write_csv(const CharacteristicTable& table, std::ostream& out) {
    out << "t,x0,xi,xi_x\n";
    for (int i = 0; i < table.grid.nt(); ++i) {
        const std::string t = format_double(table.grid.t().at(i));
        for (int j = 0; j < table.grid.nx(); ++j) {
            out << t << ',' << format_double(table.grid.x().at(j)) << ','
                << format_double(table.xi(i, j)) << ',' << format_double(table.xi_x(i, j)) << '\n';
        }
    }
}

// ---------------------------------------------------------------------------
// Growth diagnostics

GrowthReport check_growth_bounds(const CoefficientPair& c, const Region& window, double n_floor,
                                 int n_times, int n_space) {
    GrowthReport rep;
    rep.c1 = std::numeric_limits<double>::infinity();
    rep.min_abs_xi = std::numeric_limits<double>::infinity();
    std::vector<double> times(n_times);
    for (int k = 0; k < n_times; ++k) {
        times[k] = n_times == 1 ? window.t_lo
                                : window.t_lo + (window.t_hi - window.t_lo) * k / (n_times - 1);
    }
    std::vector<double> starts;
    auto add_range = [&](double lo, double hi) {
        if (!(lo < hi)) return;
        for (int k = 0; k < n_space; ++k) starts.push_back(lo + (hi - lo) * k / (n_space - 1));
    };
    add_range(window.x_lo, std::min(window.x_hi, -n_floor));
    add_range(std::max(window.x_lo, n_floor), window.x_hi);
    if (starts.empty()) return rep;

    TraceOptions opt;
    try {
        for (std::size_t a = 0; a < times.size(); ++a) {
            for (std::size_t b = a; b < times.size(); ++b) {
                const int n = b == a ? 1 : substeps_for(times[b] - times[a], opt);
                for (double x : starts) {
                    const double xi = trace(c, times[a], x, times[b], n);
                    const double ratio = std::abs(xi) / std::abs(x);
                    rep.c1 = std::min(rep.c1, ratio);
                    rep.c2 = std::max(rep.c2, ratio);
                    rep.min_abs_xi = std::min(rep.min_abs_xi, std::abs(xi));
                    ++rep.samples;
                }
            }
        }
    } catch (const DomainEscapeError&) {
        rep.pass = false;
        return rep;
    }
    rep.pass = std::isfinite(rep.c1) && std::isfinite(rep.c2) && rep.c1 > 0.0 && rep.c1 <= rep.c2 &&
               rep.min_abs_xi >= rep.c1 * n_floor / 2;
    return rep;
}

double growth_constant(const CoefficientPair& c, const Region& window, int n_t, int n_x) {
    double worst_far = 0.0;
    double worst_any = 0.0;
    bool any_far = false;
    for (int k = 0; k < n_t; ++k) {
        const double t = n_t == 1 ? window.t_lo : window.t_lo + (window.t_hi - window.t_lo) * k / (n_t - 1);
        for (int m = 0; m < n_x; ++m) {
            const double x = window.x_lo + (window.x_hi - window.x_lo) * m / (n_x - 1);
            const double a = std::abs(c.a(t, x));
            worst_any = std::max(worst_any, a);
            if (std::abs(x) >= 1.0) {
                any_far = true;
                worst_far = std::max(worst_far, a / std::abs(x));
            }
        }
    }
    return any_far ? worst_far : worst_any;
}

void check_linear_growth(const CoefficientPair& c, const Region& window) {
    constexpr int n_x = 401;
    constexpr int n_t = 5;
    std::vector<double> ratio(n_x, 0.0);
    for (int k = 0; k < n_t; ++k) {
        const double t = window.t_lo + (window.t_hi - window.t_lo) * k / (n_t - 1);
        for (int m = 0; m < n_x; ++m) {
            const double x = window.x_lo + (window.x_hi - window.x_lo) * m / (n_x - 1);
            ratio[m] = std::max(ratio[m], std::abs(c.a(t, x)) / std::max(std::abs(x), 1.0));
        }
    }
    double inner = 0.0;
    for (int m = n_x / 4; m < 3 * n_x / 4; ++m) inner = std::max(inner, ratio[m]);
    const int edge = n_x / 20;
    auto increasing_outward = [&](int from, int step) {
        for (int k = 0; k < edge; ++k) {
            if (!(ratio[from + (k + 1) * step] > ratio[from + k * step])) return false;
        }
        return true;
    };
    const bool left = increasing_outward(edge, -1) && ratio[0] > 1.5 * inner;
    const bool right = increasing_outward(n_x - 1 - edge, 1) && ratio[n_x - 1] > 1.5 * inner;
    if (left || right) {
        throw Error(ErrorKind::Growth,
                    "coefficient a appears to grow faster than linearly near x = " +
                        format_double(left ? window.x_lo : window.x_hi) +
                        "; characteristics may blow up");
    }
}

void check_padding(const CoefficientPair& c, const Grid& grid) {
    if (!c.domain()) return;
    const Region& d = *c.domain();
    const double t_span = grid.t().last() - grid.t().start;
    const double C = growth_constant(c, d);
    const double R = std::max({std::abs(grid.x().start), std::abs(grid.x().last()), 1.0});
    const double need = R * std::exp(2.0 * C * t_span);
    if (d.x_lo > -need || d.x_hi < need) {
        throw Error(ErrorKind::InvalidArgument,
                    "sampled coefficients cover [" + format_double(d.x_lo) + ", " +
                        format_double(d.x_hi) + "] but output window needs [" +
                        format_double(-need) + ", " + format_double(need) + "] (C_T = " +
                        format_double(C) + ")");
    }
    if (d.t_lo > grid.t().start || d.t_hi < grid.t().last()) {
        throw Error(ErrorKind::InvalidArgument, "sampled coefficients do not cover the output times");
    }
}

}  // namespace qlp
