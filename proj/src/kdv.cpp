#include "qlpair/kdv.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>

#include "qlpair/fft.hpp"

namespace qlp {

// ---------------------------------------------------------------------------
// Spec mini-language

namespace {

class SpecParser {
public:
    explicit SpecParser(const std::string& text) : s_(text) {}

    SpecNode parse() {
        SpecNode node = parse_node();
        skip_ws();
        if (pos_ != s_.size()) fail("unexpected trailing input");
        return node;
    }

private:
    SpecNode parse_node() {
        skip_ws();
        SpecNode node;
        node.name = identifier();
        skip_ws();
        if (peek() == ':') {
            ++pos_;
            do {
                skip_ws();
                std::string key = identifier();
                skip_ws();
                if (peek() != '=') fail("expected '=' after `" + key + "`");
                ++pos_;
                std::string value = raw_value();
                if (value.empty()) fail("empty value for `" + key + "`");
                if (!node.params.emplace(key, value).second) fail("duplicate key `" + key + "`");
                skip_ws();
            } while (peek() == ',' && ++pos_);
        }
        skip_ws();
        if (peek() == '(') {
            ++pos_;
            node.inner = std::make_shared<SpecNode>(parse_node());
            skip_ws();
            if (peek() != ')') fail("expected ')'");
            ++pos_;
        }
        return node;
    }

    std::string identifier() {
        const std::size_t start = pos_;
        while (pos_ < s_.size() &&
               (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) {
            ++pos_;
        }
        if (pos_ == start) fail("expected identifier");
        return s_.substr(start, pos_ - start);
    }

    std::string raw_value() {
        const std::size_t start = pos_;
        while (pos_ < s_.size() && s_[pos_] != ',' && s_[pos_] != '(' && s_[pos_] != ')') ++pos_;
        std::string v = s_.substr(start, pos_ - start);
        while (!v.empty() && std::isspace(static_cast<unsigned char>(v.back()))) v.pop_back();
        while (!v.empty() && std::isspace(static_cast<unsigned char>(v.front()))) v.erase(0, 1);
        return v;
    }

    char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }
    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    [[noreturn]] void fail(const std::string& why) const {
        throw Error(ErrorKind::Parse,
                    "spec `" + s_ + "`: " + why + " at position " + std::to_string(pos_));
    }

    const std::string& s_;
    std::size_t pos_ = 0;
};

double parse_number(const std::string& key, const std::string& text) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != text.size() || !std::isfinite(v)) {
        throw Error(ErrorKind::Parse, "`" + key + "` expects a number, got `" + text + "`");
    }
    return v;
}

}  // namespace

SpecNode parse_spec(const std::string& text) { return SpecParser(text).parse(); }

double SpecNode::number(const std::string& key, std::optional<double> fallback) const {
    auto it = params.find(key);
    if (it == params.end()) {
        if (fallback) return *fallback;
        throw Error(ErrorKind::Parse, "`" + name + "` requires `" + key + "`");
    }
    return parse_number(key, it->second);
}

std::string SpecNode::text(const std::string& key) const {
    auto it = params.find(key);
    if (it == params.end()) throw Error(ErrorKind::Parse, "`" + name + "` requires `" + key + "`");
    return it->second;
}

void SpecNode::require_keys(std::initializer_list<const char*> allowed) const {
    for (const auto& [key, value] : params) {
        const bool ok = std::any_of(allowed.begin(), allowed.end(),
                                    [&](const char* a) { return key == a; });
        if (!ok) throw Error(ErrorKind::Parse, "`" + name + "` does not take `" + key + "`");
    }
}

std::string to_string(const SpecNode& node) {
    std::string out = node.name;
    if (!node.params.empty()) {
        out += ':';
        bool first = true;
        for (const auto& [k, v] : node.params) {
            if (!first) out += ',';
            out += k + "=" + v;
            first = false;
        }
    }
    if (node.inner) out += "(" + to_string(*node.inner) + ")";
    return out;
}

// ---------------------------------------------------------------------------
// Specs

KdvSpec KdvSpec::zero() { return {}; }

KdvSpec KdvSpec::constant(double c) {
    KdvSpec s;
    s.kind = Kind::Constant;
    s.c = c;
    return s;
}

KdvSpec KdvSpec::soliton(double kappa, double x0) {
    if (!(kappa > 0)) throw Error(ErrorKind::InvalidArgument, "soliton needs kappa > 0");
    KdvSpec s;
    s.kind = Kind::Soliton;
    s.kappa = kappa;
    s.x0 = x0;
    return s;
}

KdvSpec KdvSpec::boosted(KdvSpec inner, double c) {
    KdvSpec s;
    s.kind = Kind::Boosted;
    s.c = c;
    s.inner = std::make_shared<KdvSpec>(std::move(inner));
    return s;
}

KdvSpec KdvSpec::numeric(Slice q0) {
    KdvSpec s;
    s.kind = Kind::Numeric;
    s.q0 = std::move(q0);
    return s;
}

bool KdvSpec::closed_form() const {
    if (kind == Kind::Numeric) return false;
    if (kind == Kind::Boosted) return inner->closed_form();
    return true;
}

KdvSpec kdv_spec_from(const SpecNode& node) {
    auto no_inner = [&] {
        if (node.inner) throw Error(ErrorKind::Parse, "`" + node.name + "` takes no inner spec");
    };
    if (node.name == "zero") {
        node.require_keys({});
        no_inner();
        return KdvSpec::zero();
    }
    if (node.name == "const") {
        node.require_keys({"c"});
        no_inner();
        return KdvSpec::constant(node.number("c"));
    }
    if (node.name == "soliton") {
        node.require_keys({"kappa", "x0"});
        no_inner();
        const double kappa = node.number("kappa", 1.0);
        if (!(kappa > 0)) throw Error(ErrorKind::Parse, "soliton needs kappa > 0");
        return KdvSpec::soliton(kappa, node.number("x0", 0.0));
    }
    if (node.name == "boost") {
        node.require_keys({"c"});
        if (!node.inner) throw Error(ErrorKind::Parse, "`boost` needs an inner spec in parentheses");
        return KdvSpec::boosted(kdv_spec_from(*node.inner), node.number("c"));
    }
    if (node.name == "numeric") {
        node.require_keys({"file"});
        no_inner();
        return KdvSpec::numeric(read_slice_csv(node.text("file")));
    }
    throw Error(ErrorKind::Parse, "unknown KdV spec `" + node.name + "`");
}

KdvSpec parse_kdv_spec(const std::string& text) { return kdv_spec_from(parse_spec(text)); }

// ---------------------------------------------------------------------------
// Numeric solver

SampledField solve_numeric(const Slice& q0, double t_max, int nt, const NumericOptions& opt) {
    const int n = q0.size();
    if (!is_power_of_two(n)) {
        throw Error(ErrorKind::InvalidArgument, "numeric KdV needs a power-of-two number of nodes");
    }
    if (std::abs(q0.values.front()) >= opt.edge_tol || std::abs(q0.values.back()) >= opt.edge_tol) {
        throw Error(ErrorKind::Numerical,
                    "initial data does not decay at the window edges (|q0| = " +
                        format_double(std::max(std::abs(q0.values.front()),
                                               std::abs(q0.values.back()))) +
                        "); only decaying data can be integrated numerically");
    }
    const int N = 2 * n;
    const int offset = n / 2;
    const Axis out_axis = opt.keep_padding ? q0.axis.extended(offset, offset) : q0.axis;
    const int out_offset = opt.keep_padding ? 0 : offset;
    const int out_n = opt.keep_padding ? N : n;
    Grid grid(out_axis, Axis{0.0, t_max / (nt - 1), nt});
    SampledField out(grid);
    std::copy(q0.values.begin(), q0.values.end(), out.row(0).begin() + (opt.keep_padding ? offset : 0));

    const double h = q0.axis.step;
    const std::vector<double> k = wavenumbers(N, h);
    const double k_cut = 2.0 / 3.0 * std::numbers::pi / h;

    double q_scale = 0.0;
    for (double v : q0.values) q_scale = std::max(q_scale, std::abs(v));
    const double dt_level = grid.dt();
    // keeps the nonlinear stage well inside the RK4 stability region and
    // the invariant drift below 1e-8 over unit time
    const double dt_stable = 0.35 / (6.0 * k_cut * std::max(q_scale, 1e-3));
    const int substeps = std::max(opt.substeps, static_cast<int>(std::ceil(dt_level / dt_stable)));
    const double dt = dt_level / substeps;

    std::vector<Complex> E(N), E2(N), ik3(N);
    for (int m = 0; m < N; ++m) {
        E[m] = std::exp(Complex(0.0, k[m] * k[m] * k[m] * dt));
        E2[m] = std::exp(Complex(0.0, k[m] * k[m] * k[m] * dt / 2));
        ik3[m] = std::abs(k[m]) <= k_cut ? Complex(0.0, 3.0 * k[m]) : Complex(0.0, 0.0);
    }

    std::vector<Complex> state(N, 0.0);
    for (int j = 0; j < n; ++j) state[offset + j] = q0.values[j];
    fft(state);

    std::vector<Complex> work(N);
    auto nonlinear = [&](const std::vector<Complex>& qh, std::vector<Complex>& res) {
        work = qh;
        fft(work, true);
        for (auto& z : work) z = Complex(z.real() * z.real(), 0.0);
        fft(work);
        for (int m = 0; m < N; ++m) res[m] = ik3[m] * work[m];
    };

    std::vector<Complex> k1(N), k2(N), k3(N), k4(N), tmp(N), real_space(N);
    const double blowup = 10.0 * (q_scale + 1.0);
    for (int level = 1; level < nt; ++level) {
        for (int s = 0; s < substeps; ++s) {
            nonlinear(state, k1);
            for (int m = 0; m < N; ++m) tmp[m] = E2[m] * (state[m] + 0.5 * dt * k1[m]);
            nonlinear(tmp, k2);
            for (int m = 0; m < N; ++m) tmp[m] = E2[m] * state[m] + 0.5 * dt * k2[m];
            nonlinear(tmp, k3);
            for (int m = 0; m < N; ++m) tmp[m] = E[m] * state[m] + dt * E2[m] * k3[m];
            nonlinear(tmp, k4);
            for (int m = 0; m < N; ++m) {
                state[m] = E[m] * state[m] +
                           dt / 6.0 * (E[m] * k1[m] + 2.0 * E2[m] * (k2[m] + k3[m]) + k4[m]);
            }
        }
        real_space = state;
        fft(real_space, true);
        double peak = 0.0;
        for (const auto& z : real_space) peak = std::max(peak, std::abs(z.real()));
        if (!std::isfinite(peak) || peak > blowup) {
            throw Error(ErrorKind::Numerical,
                        "KdV time stepping became unstable at t = " + format_double(grid.t().at(level)) +
                            "; try nt >= " + std::to_string(2 * (nt - 1) * substeps + 1));
        }
        auto row = out.row(level);
        for (int j = 0; j < out_n; ++j) row[j] = real_space[out_offset + j].real();
    }
    return out;
}

double mass(std::span<const double> q, double h) {
    double acc = 0.0;
    for (double v : q) acc += v;
    return acc * h;
}

double energy(std::span<const double> q, double h) {
    double acc = 0.0;
    for (double v : q) acc += v * v;
    return acc * h;
}

// ---------------------------------------------------------------------------
// Solutions

KdvSolution::KdvSolution(Joint joint, std::optional<Region> domain, std::string label)
    : joint_(std::move(joint)), domain_(domain), label_(std::move(label)) {
    batch_ = [j = joint_](double t, std::span<const double> x, std::span<double> q, std::span<double> qx) {
        for (std::size_t k = 0; k < x.size(); ++k) j(t, x[k], q[k], qx[k]);
    };
}

KdvSolution::KdvSolution(const ClosedKdv& closed, std::string label)
    : closed_(closed), label_(std::move(label)) {
    joint_ = [closed](double t, double x, double& q, double& qx) { closed.eval(t, x, q, qx); };
    batch_ = [closed](double t, std::span<const double> x, std::span<double> q, std::span<double> qx) {
        for (std::size_t k = 0; k < x.size(); ++k) closed.eval(t, x[k], q[k], qx[k]);
    };
}

namespace {

ClosedKdv closed_of(const KdvSpec& spec) {
    using Kind = KdvSpec::Kind;
    ClosedKdv out;
    switch (spec.kind) {
        case Kind::Zero:
            return out;
        case Kind::Constant:
            out.offset = spec.c;
            return out;
        case Kind::Soliton:
            out.soliton = true;
            out.kappa = spec.kappa;
            out.x0 = spec.x0;
            return out;
        case Kind::Boosted:
            out = closed_of(*spec.inner);
            out.offset += spec.c;
            out.drift += spec.c;
            return out;
        case Kind::Numeric:
            break;
    }
    throw Error(ErrorKind::InvalidArgument, "numeric KdV spec has no closed form");
}

std::string label_of(const KdvSpec& spec) {
    using Kind = KdvSpec::Kind;
    switch (spec.kind) {
        case Kind::Zero: return "zero";
        case Kind::Constant: return "const:c=" + format_double(spec.c);
        case Kind::Soliton:
            return "soliton:kappa=" + format_double(spec.kappa) + ",x0=" + format_double(spec.x0);
        case Kind::Boosted: return "boost:c=" + format_double(spec.c) + "(" + label_of(*spec.inner) + ")";
        case Kind::Numeric: return "numeric";
    }
    return "?";
}

}  // namespace

KdvSolution KdvSolution::from_spec(const KdvSpec& spec, const Grid* grid, const NumericOptions& opt) {
    if (spec.closed_form()) return KdvSolution(closed_of(spec), label_of(spec));
    if (spec.kind == KdvSpec::Kind::Boosted) {
        return from_spec(*spec.inner, grid, opt).boosted(spec.c);
    }
    if (!grid) throw Error(ErrorKind::InvalidArgument, "numeric KdV spec needs a time grid");
    if (grid->t().start != 0.0) throw Error(ErrorKind::InvalidArgument, "numeric KdV starts at t = 0");
    auto sol = from_samples(solve_numeric(*spec.q0, grid->t().last(), grid->nt(), opt));
    sol.label_ = "numeric";
    return sol;
}

KdvSolution KdvSolution::from_samples(const SampledField& q) {
    auto qf = std::make_shared<const BicubicField>(q);
    auto qxf = std::make_shared<const BicubicField>(deriv_x(q, 1));
    const Grid& g = q.grid();
    Region dom{g.t().start, g.t().last(), g.x().start, g.x().last()};
    return KdvSolution(
        [qf, qxf](double t, double x, double& qv, double& qx) {
            qv = (*qf)(t, x);
            qx = (*qxf)(t, x);
        },
        dom, "sampled");
}

double KdvSolution::q(double t, double x) const {
    double qv, qx;
    joint_(t, x, qv, qx);
    return qv;
}

double KdvSolution::q_x(double t, double x) const {
    double qv, qx;
    joint_(t, x, qv, qx);
    return qx;
}

SampledField KdvSolution::sample(const Grid& grid) const {
    return SampledField::sample(grid, [this](double t, double x) { return q(t, x); });
}

Slice KdvSolution::sample(const Axis& x, double t) const {
    return Slice::sample(x, [&](double xv) { return q(t, xv); });
}

KdvSolution KdvSolution::boosted(double c) const {
    const std::string label = "boost:c=" + format_double(c) + "(" + label_ + ")";
    if (closed_) {
        ClosedKdv shifted = *closed_;
        shifted.offset += c;
        shifted.drift += c;
        return KdvSolution(shifted, label);
    }
    auto inner = joint_;
    std::optional<Region> dom;
    if (domain_) {
        // the shifted point x + 6ct must stay inside the source window
        const double s_lo = std::min(6.0 * c * domain_->t_lo, 6.0 * c * domain_->t_hi);
        const double s_hi = std::max(6.0 * c * domain_->t_lo, 6.0 * c * domain_->t_hi);
        dom = Region{domain_->t_lo, domain_->t_hi, domain_->x_lo - s_lo, domain_->x_hi - s_hi};
    }
    return KdvSolution(
        [inner, c](double t, double x, double& q, double& qx) {
            inner(t, x + 6.0 * c * t, q, qx);
            q += c;
        },
        dom, label);
}

CoefficientPair KdvSolution::coefficients(double lambda, double b_scale) const {
    auto j = joint_;
    auto batch = batch_;
    return CoefficientPair(
        [j, lambda, b_scale](double t, double x, double& a, double& b) {
            double q, qx;
            j(t, x, q, qx);
            a = 4.0 * lambda + 2.0 * q;
            b = b_scale * qx;
        },
        [batch, lambda, b_scale](double t, std::span<const double> x, std::span<double> a,
                                 std::span<double> b) {
            batch(t, x, a, b);
            for (std::size_t k = 0; k < x.size(); ++k) {
                a[k] = 4.0 * lambda + 2.0 * a[k];
                b[k] *= b_scale;
            }
        },
        domain_);
}

CoefficientPair KdvSolution::transport_coefficients(double lambda) const { return coefficients(lambda, -1.0); }

CoefficientPair KdvSolution::flow_coefficients(double lambda) const { return coefficients(lambda, 2.0); }

SpaceTimeFunction KdvSolution::speed(double lambda) const {
    auto j = joint_;
    return SpaceTimeFunction([j, lambda](double t, double x) {
        double q, qx;
        j(t, x, q, qx);
        return 4.0 * lambda + 2.0 * q;
    });
}

SampledField evaluate(const KdvSpec& spec, const Grid& grid) {
    if (spec.closed_form()) return KdvSolution::from_spec(spec).sample(grid);
    if (spec.kind == KdvSpec::Kind::Numeric && same_axis(spec.q0->axis, grid.x())) {
        return solve_numeric(*spec.q0, grid.t().last(), grid.nt());
    }
    return KdvSolution::from_spec(spec, &grid).sample(grid);
}

SampledField galilean_boost(const SampledField& q, double c, const Axis& x_out) {
    const Grid& g = q.grid();
    SampledField out(Grid(x_out, g.t()));
    const bool aligned = same_axis(x_out, g.x());
    for (int i = 0; i < g.nt(); ++i) {
        const double shift = 6.0 * c * g.t().at(i);
        const Slice row = q.slice(i);
        for (int j = 0; j < x_out.size; ++j) {
            const double x = x_out.at(j) + shift;
            if (!g.x().contains(x, 1e-9 * g.h())) {
                throw Error(ErrorKind::DomainEscape,
                            "galilean boost needs q at x = " + format_double(x) +
                                ", outside the sampled window");
            }
            out(i, j) = (shift == 0.0 && aligned ? row[j] : interpolate(row, x)) + c;
        }
    }
    return out;
}

}  // namespace qlp
