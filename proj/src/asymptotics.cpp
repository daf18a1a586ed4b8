#include "qlpair/asymptotics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>
#include <numeric>

#include "qlpair/error.hpp"

namespace qlp {

// ---------------------------------------------------------------------------
// Rational

namespace {

std::int64_t checked_mul(std::int64_t a, std::int64_t b) {
    std::int64_t r;
    if (__builtin_mul_overflow(a, b, &r)) throw Error(ErrorKind::Numerical, "rational overflow");
    return r;
}

std::int64_t checked_add(std::int64_t a, std::int64_t b) {
    std::int64_t r;
    if (__builtin_add_overflow(a, b, &r)) throw Error(ErrorKind::Numerical, "rational overflow");
    return r;
}

}  // namespace

Rational::Rational(std::int64_t num, std::int64_t den) {
    if (den == 0) throw Error(ErrorKind::InvalidArgument, "rational with zero denominator");
    if (den < 0) {
        num = -num;
        den = -den;
    }
    const std::int64_t g = std::gcd(num < 0 ? -num : num, den);
    num_ = num / (g == 0 ? 1 : g);
    den_ = den / (g == 0 ? 1 : g);
}

Rational operator+(Rational a, Rational b) {
    const std::int64_t g = std::gcd(a.den_, b.den_);
    const std::int64_t l = checked_mul(a.den_ / g, b.den_);
    return Rational(checked_add(checked_mul(a.num_, l / a.den_), checked_mul(b.num_, l / b.den_)), l);
}

Rational operator-(Rational a, Rational b) { return a + (-b); }

Rational operator*(Rational a, Rational b) {
    const std::int64_t g1 = std::gcd(a.num_ < 0 ? -a.num_ : a.num_, b.den_);
    const std::int64_t g2 = std::gcd(b.num_ < 0 ? -b.num_ : b.num_, a.den_);
    const std::int64_t s1 = g1 == 0 ? 1 : g1;
    const std::int64_t s2 = g2 == 0 ? 1 : g2;
    return Rational(checked_mul(a.num_ / s1, b.num_ / s2), checked_mul(a.den_ / s2, b.den_ / s1));
}

Rational operator/(Rational a, Rational b) {
    if (b.num_ == 0) throw Error(ErrorKind::InvalidArgument, "rational division by zero");
    return a * Rational(b.den_, b.num_);
}

std::strong_ordering operator<=>(Rational a, Rational b) {
    const __int128 l = static_cast<__int128>(a.num_) * b.den_;
    const __int128 r = static_cast<__int128>(b.num_) * a.den_;
    if (l < r) return std::strong_ordering::less;
    if (l > r) return std::strong_ordering::greater;
    return std::strong_ordering::equal;
}

Rational parse_rational(const std::string& text) {
    auto fail = [&]() -> Rational { throw Error(ErrorKind::Parse, "not a rational number: '" + text + "'"); };
    std::string s;
    for (char c : text) {
        if (!std::isspace(static_cast<unsigned char>(c))) s += c;
    }
    if (s.empty()) return fail();
    auto parse_int = [&](const std::string& part) -> std::int64_t {
        std::size_t used = 0;
        std::int64_t v = 0;
        try {
            v = std::stoll(part, &used);
        } catch (const std::exception&) {
            fail();
        }
        if (used != part.size()) fail();
        return v;
    };
    if (auto slash = s.find('/'); slash != std::string::npos) {
        return Rational(parse_int(s.substr(0, slash)), parse_int(s.substr(slash + 1)));
    }
    if (auto dot = s.find('.'); dot != std::string::npos) {
        const std::string whole = s.substr(0, dot);
        const std::string frac = s.substr(dot + 1);
        if (frac.empty() || frac.size() > 15 || !std::all_of(frac.begin(), frac.end(), ::isdigit)) fail();
        const bool negative = !whole.empty() && whole[0] == '-';
        const std::string digits = negative || (!whole.empty() && whole[0] == '+') ? whole.substr(1) : whole;
        std::int64_t scale = 1;
        for (std::size_t k = 0; k < frac.size(); ++k) scale *= 10;
        const Rational w(digits.empty() ? 0 : parse_int(digits));
        const Rational f(parse_int(frac), scale);
        return negative ? -(w + f) : w + f;
    }
    return Rational(parse_int(s));
}

std::string to_string(Rational r) {
    if (r.den() == 1) return std::to_string(r.num());
    return std::to_string(r.num()) + "/" + std::to_string(r.den());
}

nlohmann::json to_json(Rational r) { return {{"num", r.num()}, {"den", r.den()}}; }

Rational rational_from_json(const nlohmann::json& j) {
    if (j.is_number_integer()) return Rational(j.get<std::int64_t>());
    if (j.is_string()) return parse_rational(j.get<std::string>());
    if (!j.is_object() || !j.contains("num") || !j.contains("den")) {
        throw Error(ErrorKind::Parse, "exponent must be {\"num\": p, \"den\": q}");
    }
    return Rational(j.at("num").get<std::int64_t>(), j.at("den").get<std::int64_t>());
}

// ---------------------------------------------------------------------------
// Exponent sets

ExponentSet::ExponentSet(Rational floor) : floor_(floor) {}

ExponentSet::ExponentSet(std::vector<Rational> elements, Rational floor) : floor_(floor) {
    for (Rational e : elements) insert(e);
}

bool ExponentSet::insert(Rational e) {
    if (e < floor_) return false;
    auto it = std::lower_bound(elements_.begin(), elements_.end(), e, std::greater<>());
    if (it != elements_.end() && *it == e) return false;
    elements_.insert(it, e);
    return true;
}

bool ExponentSet::contains(Rational e) const { return index_of(e).has_value(); }

std::optional<std::size_t> ExponentSet::index_of(Rational e) const {
    auto it = std::lower_bound(elements_.begin(), elements_.end(), e, std::greater<>());
    if (it == elements_.end() || *it != e) return std::nullopt;
    return static_cast<std::size_t>(it - elements_.begin());
}

Rational ExponentSet::max() const {
    if (elements_.empty()) throw Error(ErrorKind::InvalidArgument, "empty exponent set has no maximum");
    return elements_.front();
}

ExponentSet closure_delta(const ExponentSet& delta) {
    if (delta.empty()) return delta;
    if (delta.max() >= Rational(1)) {
        throw Error(ErrorKind::InvalidArgument, "exponent closure needs max < 1, got " + to_string(delta.max()));
    }
    ExponentSet out = delta;
    const Rational one(1);
    bool grown = true;
    while (grown) {
        grown = false;
        const std::vector<Rational> current = out.elements();
        for (std::size_t i = 0; i < current.size(); ++i) {
            grown |= out.insert(current[i] - one);
            for (std::size_t j = i; j < current.size(); ++j) grown |= out.insert(current[i] + current[j] - one);
        }
    }
    return out;
}

ExponentSet build_barB(const ExponentSet& b_set, const ExponentSet& closure) {
    const Rational floor = closure.floor();
    const Rational one(1);
    if (!b_set.empty() && b_set.max() >= Rational(1, 2)) {
        throw Error(ErrorKind::InvalidArgument, "lattice construction needs max B < 1/2");
    }
    // close once more below the floor so that truncation does not cut the
    // sums b + d that land back above it
    ExponentSet deep(closure.elements(), floor - Rational(2));
    deep = closure_delta(deep);

    ExponentSet out(floor);
    for (Rational d : deep.elements()) out.insert(d);
    for (Rational b : b_set.elements()) {
        out.insert(b + one);
        for (Rational d : deep.elements()) out.insert(b + d);
    }

    auto fail = [](const std::string& what) { throw Error(ErrorKind::Consistency, "exponent lattice: " + what); };
    if (!b_set.empty() && !(out.max() == b_set.max() + one)) {
        fail("max is " + to_string(out.max()) + ", expected " + to_string(b_set.max() + one));
    }
    for (Rational d : closure.elements()) {
        if (d - one >= floor && !out.contains(d - one)) fail(to_string(d) + " - 1 missing");
        for (Rational b : out.elements()) {
            const Rational e = d + b - one;
            if (e >= floor && !out.contains(e)) fail(to_string(d) + " + " + to_string(b) + " - 1 missing");
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Symbols

namespace {

double side_sign(Side s) { return s == Side::Plus ? 1.0 : -1.0; }
Rational side_rational(Side s) { return Rational(s == Side::Plus ? 1 : -1); }

double sample_at(const std::vector<double>& values, const std::optional<Axis>& times, double t) {
    if (values.size() == 1) return values[0];
    return interpolate(Slice(*times, values), t);
}

void require_same_sampling(const Symbol& a, const Symbol& b) {
    if (a.side != b.side) throw Error(ErrorKind::InvalidArgument, "symbols on different sides");
    if (a.times && b.times && !same_axis(*a.times, *b.times)) {
        throw Error(ErrorKind::InvalidArgument, "symbols sampled on different time axes");
    }
}

// Elementwise combination where a constant broadcasts over samples.
std::vector<double> combine(const std::vector<double>& a, const std::vector<double>& b,
                            const std::function<double(double, double)>& op) {
    const std::size_t n = std::max(a.size(), b.size());
    std::vector<double> out(n);
    for (std::size_t k = 0; k < n; ++k) out[k] = op(a[a.size() == 1 ? 0 : k], b[b.size() == 1 ? 0 : k]);
    return out;
}

}  // namespace

std::vector<double> SymbolTerm::values() const {
    std::vector<double> out = coeff;
    if (!(scale == Rational(1))) {
        for (double& v : out) v *= scale.value();
    }
    return out;
}

void Symbol::normalize() {
    std::stable_sort(terms.begin(), terms.end(),
                     [](const SymbolTerm& a, const SymbolTerm& b) { return a.exponent > b.exponent; });
    std::vector<SymbolTerm> merged;
    for (SymbolTerm& t : terms) {
        if (t.exponent < floor) continue;
        if (!merged.empty() && merged.back().exponent == t.exponent) {
            SymbolTerm& m = merged.back();
            m.coeff = combine(m.values(), t.values(), std::plus<>());
            m.scale = Rational(1);
        } else {
            merged.push_back(std::move(t));
        }
    }
    terms = std::move(merged);
}

std::optional<Rational> Symbol::leading() const {
    for (const SymbolTerm& t : terms) {
        if (std::any_of(t.coeff.begin(), t.coeff.end(), [](double v) { return v != 0.0; }) && !t.scale.is_zero()) {
            return t.exponent;
        }
    }
    return std::nullopt;
}

double Symbol::coeff(std::size_t k, double t) const {
    return terms.at(k).scale.value() * sample_at(terms[k].coeff, times, t);
}

ExponentSet Symbol::exponents() const {
    ExponentSet out(floor);
    for (const SymbolTerm& t : terms) out.insert(t.exponent);
    return out;
}

double StarSymbol::log_at(double t) const { return sample_at(log_coeff, powers.times, t); }
double StarSymbol::const_at(double t) const { return sample_at(const_coeff, powers.times, t); }

Symbol make_symbol(Side side, std::vector<std::pair<Rational, double>> terms, Rational floor) {
    Symbol s;
    s.side = side;
    s.floor = floor;
    for (auto [e, c] : terms) s.terms.push_back({e, {c}, Rational(1)});
    s.normalize();
    return s;
}

Symbol derivative(const Symbol& s) {
    Symbol out{s.side, s.floor - Rational(1), s.times, {}};
    const Rational sign = side_rational(s.side);
    for (const SymbolTerm& t : s.terms) {
        if (t.exponent.is_zero()) continue;
        out.terms.push_back({t.exponent - Rational(1), t.coeff, t.scale * t.exponent * sign});
    }
    out.normalize();
    return out;
}

Symbol derivative(const StarSymbol& s) {
    Symbol out = derivative(s.powers);
    if (std::any_of(s.log_coeff.begin(), s.log_coeff.end(), [](double v) { return v != 0.0; })) {
        out.terms.push_back({Rational(-1), s.log_coeff, side_rational(s.powers.side)});
        out.normalize();
    }
    return out;
}

Symbol product(const Symbol& a, const Symbol& b) {
    require_same_sampling(a, b);
    Symbol out{a.side, std::max(a.floor, b.floor), a.times ? a.times : b.times, {}};
    for (const SymbolTerm& x : a.terms) {
        for (const SymbolTerm& y : b.terms) {
            const Rational e = x.exponent + y.exponent;
            if (e < out.floor) continue;
            out.terms.push_back({e, combine(x.coeff, y.coeff, std::multiplies<>()), x.scale * y.scale});
        }
    }
    out.normalize();
    return out;
}

Symbol sum(const Symbol& a, const Symbol& b) {
    require_same_sampling(a, b);
    Symbol out{a.side, std::max(a.floor, b.floor), a.times ? a.times : b.times, a.terms};
    out.terms.insert(out.terms.end(), b.terms.begin(), b.terms.end());
    out.normalize();
    return out;
}

GateResult beta_gate(const Symbol& r0, bool o_class) {
    GateResult g;
    g.beta = r0.leading();
    if (!g.beta) {
        g.pass = true;
        g.message = "zero symbol";
        return g;
    }
    const Rational beta = *g.beta;
    g.witness = Rational(3) * beta;
    g.bound = beta + Rational(1);
    const Rational half(1, 2);
    if (beta < half || (o_class && beta == half)) {
        g.pass = true;
        g.message = "leading exponent " + to_string(beta) + " admitted";
        return g;
    }
    g.pass = false;
    if (beta == half) {
        g.message = "leading exponent 1/2 is admitted only for the o-class; 2 q p_x reaches x^" +
                    to_string(g.witness) + " = x^(beta+1)";
    } else {
        g.message = "no formal solution: leading exponent " + to_string(beta) + " >= 1/2, 2 q p_x carries x^" +
                    to_string(g.witness) + " above the leading power x^" + to_string(g.bound) + " of p";
    }
    return g;
}

Symbol miura_symbol(const Symbol& r) {
    const GateResult g = beta_gate(r);
    if (!g.pass) throw Error(ErrorKind::Obstruction, g.message);
    return sum(derivative(r), product(r, r));
}

StarSymbol integrate_symbol(const Symbol& f) {
    StarSymbol out;
    out.powers = Symbol{f.side, f.floor, f.times, {}};
    out.log_coeff.assign(1, 0.0);
    out.const_coeff.assign(1, 0.0);
    const Rational sign = side_rational(f.side);
    for (const SymbolTerm& t : f.terms) {
        if (t.exponent == Rational(-1)) {
            out.log_coeff = t.values();
            for (double& v : out.log_coeff) v *= sign.value();
            continue;
        }
        const Rational e = t.exponent + Rational(1);
        out.powers.terms.push_back({e, t.coeff, t.scale * sign / e});
    }
    out.powers.floor = f.floor + Rational(1);
    out.powers.normalize();
    return out;
}

// ---------------------------------------------------------------------------
// Formal evolution

bool EvolutionSystem::strictly_lower_triangular() const {
    for (std::size_t k = 0; k < rows.size(); ++k) {
        for (const Linear& l : rows[k].linear) {
            if (l.source >= k) return false;
        }
    }
    return true;
}

namespace {

bool any_nonzero(const std::vector<double>& v) {
    return std::any_of(v.begin(), v.end(), [](double x) { return x != 0.0; });
}

}  // namespace

EvolutionSystem assemble_evolution(const StarSymbol& p0, const Symbol& q) {
    const Symbol& p = p0.powers;
    if (p.side != q.side) throw Error(ErrorKind::InvalidArgument, "p0 and q symbols on different sides");
    const Rational one(1);
    const Rational floor = p.floor;

    // exponents of r0 are those of p0 shifted down; a log term stands for x^-1
    ExponentSet b_set(floor - one);
    for (const SymbolTerm& t : p.terms) b_set.insert(t.exponent - one);
    if (any_nonzero(p0.log_coeff)) b_set.insert(Rational(-1));
    if (!b_set.empty() && b_set.max() >= Rational(1, 2)) {
        const Rational beta = b_set.max();
        throw Error(ErrorKind::Obstruction, "no formal solution: leading exponent " + to_string(beta) +
                                                " >= 1/2, 2 q p_x carries x^" + to_string(Rational(3) * beta) +
                                                " above x^" + to_string(beta + one));
    }

    EvolutionSystem sys;
    ExponentSet q_set(floor);
    for (const SymbolTerm& t : q.terms) q_set.insert(t.exponent);
    sys.q_exponents = closure_delta(q_set);
    sys.exponents = build_barB(b_set, sys.q_exponents);
    sys.rows.resize(sys.exponents.size());

    const Rational sign = side_rational(q.side);
    const Rational top = sys.exponents.empty() ? Rational(0) : sys.exponents.max();
    auto place = [&](Rational e, const std::string& what) -> std::optional<std::size_t> {
        if (!b_set.empty() && e >= top) {
            throw Error(ErrorKind::Obstruction, "no formal solution: " + what + " produces x^" + to_string(e) +
                                                    " at or above the leading power x^" + to_string(top));
        }
        if (e < floor) {
            ++sys.dropped;
            return std::nullopt;
        }
        auto idx = sys.exponents.index_of(e);
        if (!idx) throw Error(ErrorKind::Consistency, "exponent x^" + to_string(e) + " from " + what + " not in lattice");
        return idx;
    };

    for (std::size_t i = 0; i < q.terms.size(); ++i) {
        const Rational d = q.terms[i].exponent;
        if (d < floor) continue;
        // 2 q chi_x: powers
        for (std::size_t n = 0; n < sys.exponents.size(); ++n) {
            const Rational e = sys.exponents.elements()[n];
            if (e.is_zero()) continue;
            if (auto k = place(d + e - one, "2 q p_x")) {
                sys.rows[*k].linear.push_back({n, i, Rational(2) * e * sign});
            }
        }
        // 2 q chi_x: the log term, and -q_x
        if (auto k = place(d - one, "q_x")) {
            sys.rows[*k].forcing.push_back({i, Rational(2) * sign, true});
            if (!d.is_zero()) sys.rows[*k].forcing.push_back({i, -d * sign, false});
        }
    }
    if (!sys.rows.empty() && !b_set.empty() && (!sys.rows[0].linear.empty() || !sys.rows[0].forcing.empty())) {
        throw Error(ErrorKind::Consistency, "leading row has a right side");
    }
    if (!sys.strictly_lower_triangular()) throw Error(ErrorKind::Consistency, "evolution system is not triangular");
    return sys;
}

namespace {

constexpr double kMaxFormalStep = 0.005;

int substeps(double dt) { return std::max(1, static_cast<int>(std::ceil(std::abs(dt) / kMaxFormalStep - 1e-12))); }

void require_time_cover(const Symbol& s, const Axis& times) {
    if (!s.times) return;
    const double slack = 1e-12;
    if (times.start < s.times->start - slack || times.last() > s.times->last() + slack) {
        throw Error(ErrorKind::InvalidArgument, "symbol coefficients do not cover the requested times");
    }
}

// Classical RK4 over the output axis with f(t, y, dy).
template <class F>
std::vector<std::vector<double>> rk4(const Axis& times, std::vector<double> y, const F& f) {
    const std::size_t n = y.size();
    std::vector<std::vector<double>> out(times.size, std::vector<double>(n));
    out[0] = y;
    std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n);
    for (int i = 1; i < times.size; ++i) {
        const double t0 = times.at(i - 1);
        const int m = substeps(times.step);
        const double h = times.step / m;
        for (int s = 0; s < m; ++s) {
            const double t = t0 + s * h;
            f(t, y, k1);
            for (std::size_t j = 0; j < n; ++j) tmp[j] = y[j] + 0.5 * h * k1[j];
            f(t + 0.5 * h, tmp, k2);
            for (std::size_t j = 0; j < n; ++j) tmp[j] = y[j] + 0.5 * h * k2[j];
            f(t + 0.5 * h, tmp, k3);
            for (std::size_t j = 0; j < n; ++j) tmp[j] = y[j] + h * k3[j];
            f(t + h, tmp, k4);
            for (std::size_t j = 0; j < n; ++j) y[j] += h / 6.0 * (k1[j] + 2 * k2[j] + 2 * k3[j] + k4[j]);
        }
        out[i] = y;
    }
    return out;
}

std::vector<double> q_coefficients(const Symbol& q, double t) {
    std::vector<double> c(q.terms.size());
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = q.coeff(i, t);
    return c;
}

}  // namespace

StarSymbol formal_evolution(const StarSymbol& p0, const Symbol& q, const Axis& times) {
    require_time_cover(q, times);
    const EvolutionSystem sys = assemble_evolution(p0, q);
    const double t0 = times.start;
    const double log0 = p0.log_at(t0);
    const double const0 = p0.const_at(t0);

    std::vector<double> a(sys.exponents.size(), 0.0);
    for (std::size_t k = 0; k < p0.powers.terms.size(); ++k) {
        a[*sys.exponents.index_of(p0.powers.terms[k].exponent)] = p0.powers.coeff(k, t0);
    }
    // the log coefficient has an empty row, so it enters as a constant
    auto rhs = [&](double t, const std::vector<double>& y, std::vector<double>& dy) {
        const std::vector<double> c = q_coefficients(q, t);
        for (std::size_t k = 0; k < sys.rows.size(); ++k) {
            double acc = 0.0;
            for (const auto& l : sys.rows[k].linear) acc += l.factor.value() * c[l.q_term] * y[l.source];
            for (const auto& f : sys.rows[k].forcing) acc += f.factor.value() * c[f.q_term] * (f.with_log ? log0 : 1.0);
            dy[k] = acc;
        }
    };
    const auto traj = rk4(times, a, rhs);

    StarSymbol out;
    out.powers = Symbol{p0.powers.side, p0.powers.floor, times, {}};
    for (std::size_t k = 0; k < sys.exponents.size(); ++k) {
        std::vector<double> samples(times.size);
        for (int i = 0; i < times.size; ++i) samples[i] = traj[i][k];
        out.powers.terms.push_back({sys.exponents.elements()[k], std::move(samples), Rational(1)});
    }
    out.log_coeff.assign(times.size, log0);
    out.const_coeff.assign(times.size, const0);
    return out;
}

Symbol kdv_symbol_flow(const Symbol& q0, const Axis& times) {
    require_time_cover(q0, times);
    const ExponentSet lattice = closure_delta(q0.exponents());
    const auto& e = lattice.elements();
    const std::size_t n = e.size();
    const Rational one(1);
    const Rational sign = side_rational(q0.side);

    struct Quadratic {
        std::size_t i, j, k;
        double factor;
    };
    struct Linear {
        std::size_t j, k;
        double factor;
    };
    std::vector<Quadratic> quad;
    std::vector<Linear> lin;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            // 6 q q_x: c_i c_j delta_j x^(delta_i + delta_j - 1)
            if (e[j].is_zero()) continue;
            if (auto k = lattice.index_of(e[i] + e[j] - one)) quad.push_back({i, j, *k, (Rational(6) * e[j] * sign).value()});
        }
        // -q_xxx
        const Rational c3 = e[i] * (e[i] - one) * (e[i] - Rational(2)) * sign;
        if (c3.is_zero()) continue;
        if (auto k = lattice.index_of(e[i] - Rational(3))) lin.push_back({i, *k, -c3.value()});
    }

    std::vector<double> c(n, 0.0);
    for (std::size_t k = 0; k < q0.terms.size(); ++k) c[*lattice.index_of(q0.terms[k].exponent)] = q0.coeff(k, times.start);
    auto rhs = [&](double, const std::vector<double>& y, std::vector<double>& dy) {
        std::fill(dy.begin(), dy.end(), 0.0);
        for (const auto& t : quad) dy[t.k] += t.factor * y[t.i] * y[t.j];
        for (const auto& t : lin) dy[t.k] += t.factor * y[t.j];
    };
    const auto traj = rk4(times, c, rhs);

    Symbol out{q0.side, q0.floor, times, {}};
    for (std::size_t k = 0; k < n; ++k) {
        std::vector<double> samples(times.size);
        for (int i = 0; i < times.size; ++i) samples[i] = traj[i][k];
        out.terms.push_back({e[k], std::move(samples), Rational(1)});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Evaluation and JSON

namespace {

double side_argument(Side side, double x) {
    const double y = side_sign(side) * x;
    if (!(y >= 1.0)) {
        throw Error(ErrorKind::InvalidArgument, "symbol evaluation needs " +
                                                    std::string(side == Side::Plus ? "x >= 1" : "x <= -1") +
                                                    ", got x = " + format_double(x));
    }
    return y;
}

double power_sum(const Symbol& s, double t, double y, int n_terms) {
    const std::size_t n = n_terms < 0 ? s.terms.size() : std::min<std::size_t>(n_terms, s.terms.size());
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) acc += s.coeff(k, t) * std::pow(y, s.terms[k].exponent.value());
    return acc;
}

nlohmann::json samples_json(const std::vector<double>& v) {
    if (v.size() == 1) return v[0];
    return v;
}

std::vector<double> samples_from(const nlohmann::json& j) {
    if (j.is_number()) return {j.get<double>()};
    if (j.is_array() && !j.empty()) return j.get<std::vector<double>>();
    throw Error(ErrorKind::Parse, "coefficient must be a number or a non-empty array");
}

}  // namespace

double symbol_eval(const Symbol& s, double t, double x, int n_terms) {
    return power_sum(s, t, side_argument(s.side, x), n_terms);
}

double symbol_eval(const StarSymbol& s, double t, double x, int n_terms) {
    const double y = side_argument(s.powers.side, x);
    return power_sum(s.powers, t, y, n_terms) + s.log_at(t) * std::log(y) + s.const_at(t);
}

nlohmann::json to_json(const Symbol& s) {
    nlohmann::json j;
    j["side"] = s.side == Side::Plus ? "+" : "-";
    j["floor"] = to_json(s.floor);
    if (s.times) j["times"] = {{"start", s.times->start}, {"step", s.times->step}, {"size", s.times->size}};
    j["terms"] = nlohmann::json::array();
    for (const SymbolTerm& t : s.terms) {
        j["terms"].push_back({{"exp", to_json(t.exponent)}, {"coeff", samples_json(t.values())}});
    }
    j["log"] = 0.0;
    j["const"] = 0.0;
    return j;
}

nlohmann::json to_json(const StarSymbol& s) {
    nlohmann::json j = to_json(s.powers);
    j["log"] = samples_json(s.log_coeff);
    j["const"] = samples_json(s.const_coeff);
    return j;
}

StarSymbol star_symbol_from_json(const nlohmann::json& j) {
    try {
        StarSymbol out;
        Symbol& s = out.powers;
        const std::string side = j.value("side", "+");
        if (side != "+" && side != "-") throw Error(ErrorKind::Parse, "side must be \"+\" or \"-\"");
        s.side = side == "+" ? Side::Plus : Side::Minus;
        if (j.contains("floor")) s.floor = rational_from_json(j.at("floor"));
        if (j.contains("times")) {
            const auto& tj = j.at("times");
            s.times = Axis{tj.at("start").get<double>(), tj.at("step").get<double>(), tj.at("size").get<int>()};
        }
        for (const auto& tj : j.at("terms")) {
            s.terms.push_back({rational_from_json(tj.at("exp")), samples_from(tj.at("coeff")), Rational(1)});
        }
        out.log_coeff = j.contains("log") ? samples_from(j.at("log")) : std::vector<double>{0.0};
        out.const_coeff = j.contains("const") ? samples_from(j.at("const")) : std::vector<double>{0.0};
        const std::size_t expected = static_cast<std::size_t>(s.samples());
        auto check = [&](const std::vector<double>& v) {
            if (v.size() != 1 && v.size() != expected) throw Error(ErrorKind::Parse, "coefficient sample count mismatch");
        };
        for (const auto& t : s.terms) check(t.coeff);
        check(out.log_coeff);
        check(out.const_coeff);
        s.normalize();
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Parse, std::string("symbol JSON: ") + e.what());
    }
}

Symbol symbol_from_json(const nlohmann::json& j) {
    StarSymbol s = star_symbol_from_json(j);
    if (any_nonzero(s.log_coeff) || any_nonzero(s.const_coeff)) {
        throw Error(ErrorKind::Parse, "symbol JSON: log and const must be zero for a plain symbol");
    }
    return s.powers;
}

}  // namespace qlp
