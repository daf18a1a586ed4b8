#include "qlpair/field.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace qlp {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidArgument: return "invalid argument";
        case ErrorKind::Parse: return "parse error";
        case ErrorKind::Stencil: return "stencil error";
        case ErrorKind::DomainEscape: return "domain escape";
        case ErrorKind::Growth: return "growth bound violation";
        case ErrorKind::MiuraGate: return "consistency gate";
        case ErrorKind::Numerical: return "numerical failure";
        case ErrorKind::Obstruction: return "no formal solution";
        case ErrorKind::Consistency: return "internal consistency";
    }
    return "error";
}

// ---------------------------------------------------------------------------
// Axis / Grid

std::optional<int> Axis::zero_index() const {
    if (size <= 0) return std::nullopt;
    const double s = -start / step;
    const long j = std::lround(s);
    if (j < 0 || j >= size) return std::nullopt;
    if (std::abs(at(static_cast<int>(j))) > 1e-12) return std::nullopt;
    return static_cast<int>(j);
}

std::vector<double> Axis::nodes() const {
    std::vector<double> x(size);
    for (int j = 0; j < size; ++j) x[j] = at(j);
    return x;
}

Axis Axis::extended(int left, int right) const {
    Axis a = *this;
    if (auto z = zero_index()) {
        // keep x = 0 an exact node
        a.start = -((*z + left) * step);
    } else {
        a.start = start - left * step;
    }
    a.size = size + left + right;
    return a;
}

Axis Axis::snapped(double lo, double hi, int n) {
    if (!(lo < hi) || n < 2) {
        throw Error(ErrorKind::InvalidArgument, "axis needs lo < hi and at least 2 nodes");
    }
    Axis a{lo, (hi - lo) / (n - 1), n};
    if (lo <= 0.0 && hi >= 0.0) {
        const long j0 = std::lround(-lo / a.step);
        a.start = -(j0 * a.step);
    }
    return a;
}

bool same_axis(const Axis& a, const Axis& b, double tol) {
    return a.size == b.size && std::abs(a.start - b.start) <= tol &&
           std::abs(a.step - b.step) <= tol;
}

Grid::Grid(double x_min, double x_max, int nx, double t0, double t_max, int nt) {
    if (!(x_min < x_max)) throw Error(ErrorKind::InvalidArgument, "grid needs x_min < x_max");
    if (nx < 16) throw Error(ErrorKind::InvalidArgument, "grid needs nx >= 16");
    if (nt < 2) throw Error(ErrorKind::InvalidArgument, "grid needs nt >= 2");
    if (!(t0 < t_max)) throw Error(ErrorKind::InvalidArgument, "grid needs t0 < t_max");
    x_ = Axis::snapped(x_min, x_max, nx);
    t_ = Axis{t0, (t_max - t0) / (nt - 1), nt};
}

Grid::Grid(Axis x, Axis t) : x_(x), t_(t) {
    if (x_.size < 16 || !(x_.step > 0)) throw Error(ErrorKind::InvalidArgument, "grid needs nx >= 16 and h > 0");
    if (t_.size < 2 || !(t_.step > 0)) throw Error(ErrorKind::InvalidArgument, "grid needs nt >= 2 and dt > 0");
}

// ---------------------------------------------------------------------------
// Slice / SampledField

Slice::Slice(Axis a, std::vector<double> v) : axis(a), values(std::move(v)) {
    if (static_cast<int>(values.size()) != axis.size) {
        throw Error(ErrorKind::InvalidArgument, "slice length does not match its axis");
    }
    for (double x : values) {
        if (!std::isfinite(x)) throw Error(ErrorKind::Numerical, "slice has non-finite values");
    }
}

Slice Slice::sample(const Axis& a, const std::function<double(double)>& f) {
    std::vector<double> v(a.size);
    for (int j = 0; j < a.size; ++j) v[j] = f(a.at(j));
    return Slice(a, std::move(v));
}

SampledField::SampledField(Grid grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
    if (values_.size() != static_cast<std::size_t>(grid_.nt()) * grid_.nx()) {
        throw Error(ErrorKind::InvalidArgument, "field size does not match its grid");
    }
}

SampledField::SampledField(Grid grid)
    : grid_(std::move(grid)),
      values_(static_cast<std::size_t>(grid_.nt()) * grid_.nx(), 0.0) {}

SampledField SampledField::sample(const Grid& grid,
                                  const std::function<double(double, double)>& f) {
    SampledField out(grid);
    for (int i = 0; i < grid.nt(); ++i) {
        const double t = grid.t().at(i);
        for (int j = 0; j < grid.nx(); ++j) out(i, j) = f(t, grid.x().at(j));
    }
    return out;
}

std::span<const double> SampledField::row(int i) const {
    return {values_.data() + index(i, 0), static_cast<std::size_t>(grid_.nx())};
}

std::span<double> SampledField::row(int i) {
    return {values_.data() + index(i, 0), static_cast<std::size_t>(grid_.nx())};
}

Slice SampledField::slice(int i) const {
    auto r = row(i);
    return Slice(grid_.x(), std::vector<double>(r.begin(), r.end()));
}

void SampledField::require_finite(const char* what) const {
    for (double v : values_) {
        if (!std::isfinite(v)) {
            throw Error(ErrorKind::Numerical, std::string(what) + ": non-finite value");
        }
    }
}

// ---------------------------------------------------------------------------
// Finite differences

std::vector<double> fd_weights(std::span<const int> offsets, int order) {
    // Fornberg's recursion for the weights at z = 0.
    const int n = static_cast<int>(offsets.size());
    std::vector<std::vector<double>> c(n, std::vector<double>(order + 1, 0.0));
    double c1 = 1.0;
    double c4 = offsets[0];
    c[0][0] = 1.0;
    for (int i = 1; i < n; ++i) {
        const int mn = std::min(i, order);
        double c2 = 1.0;
        const double c5 = c4;
        c4 = offsets[i];
        for (int j = 0; j < i; ++j) {
            const double c3 = static_cast<double>(offsets[i]) - offsets[j];
            c2 *= c3;
            if (j == i - 1) {
                for (int k = mn; k >= 1; --k) {
                    c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for (int k = mn; k >= 1; --k) {
                c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    std::vector<double> w(n);
    for (int i = 0; i < n; ++i) w[i] = c[i][order];
    // derivative weights annihilate constants; restore that exactly
    if (order >= 1) {
        int centre = -1;
        for (int i = 0; i < n; ++i) {
            if (offsets[i] == 0) centre = i;
        }
        if (centre >= 0) {
            double others = 0.0;
            for (int i = 0; i < n; ++i) {
                if (i != centre) others += w[i];
            }
            w[centre] = -others;
        }
    }
    return w;
}

namespace {

struct Stencil {
    int lo = 0;  // offset of the first node relative to the evaluation node
    std::vector<double> w;
};

int central_halfwidth(int order) { return order <= 2 ? 2 : 3; }

Stencil make_stencil(int lo, int count, int order) {
    std::vector<int> offs(count);
    for (int k = 0; k < count; ++k) offs[k] = lo + k;
    return {lo, fd_weights(offs, order)};
}

}  // namespace

std::vector<double> derivative(std::span<const double> f, double h, int order) {
    if (order < 1 || order > 4) {
        throw Error(ErrorKind::InvalidArgument, "derivative order must be in 1..4");
    }
    const int n = static_cast<int>(f.size());
    if (n < order + 5) {
        throw Error(ErrorKind::Stencil, "grid too small for derivative of order " +
                                            std::to_string(order) + " (need >= " +
                                            std::to_string(order + 5) + " nodes)");
    }
    const int m = central_halfwidth(order);
    const int one_sided = order + 4;
    const double scale = 1.0 / std::pow(h, order);

    const Stencil central = make_stencil(-m, 2 * m + 1, order);
    std::vector<double> out(n);
    for (int j = m; j < n - m; ++j) {
        double acc = 0.0;
        for (int k = 0; k < 2 * m + 1; ++k) acc += central.w[k] * (f[j - m + k] - f[j]);
        out[j] = acc * scale;
    }
    for (int j = 0; j < m; ++j) {
        for (int side = 0; side < 2; ++side) {
            const int node = side == 0 ? j : n - 1 - j;
            const int first = side == 0 ? 0 : n - one_sided;
            const Stencil s = make_stencil(first - node, one_sided, order);
            double acc = 0.0;
            for (int k = 0; k < one_sided; ++k) acc += s.w[k] * (f[first + k] - f[node]);
            out[node] = acc * scale;
        }
    }
    return out;
}

Slice deriv_x(const Slice& f, int order) {
    return Slice(f.axis, derivative(f.values, f.axis.step, order));
}

SampledField deriv_x(const SampledField& f, int order) {
    SampledField out(f.grid());
    for (int i = 0; i < f.nt(); ++i) {
        auto d = derivative(f.row(i), f.grid().h(), order);
        std::copy(d.begin(), d.end(), out.row(i).begin());
    }
    return out;
}

SampledField deriv_t(const SampledField& f, int order) {
    SampledField out(f.grid());
    std::vector<double> column(f.nt());
    for (int j = 0; j < f.nx(); ++j) {
        for (int i = 0; i < f.nt(); ++i) column[i] = f(i, j);
        auto d = derivative(column, f.grid().dt(), order);
        for (int i = 0; i < f.nt(); ++i) out(i, j) = d[i];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Quadrature

namespace {

// integral over [x_j, x_{j+1}] from the cubic through 4 neighbouring nodes
double cell_integral(std::span<const double> f, double h, int j) {
    const int n = static_cast<int>(f.size());
    if (j == 0) return h / 24.0 * (9 * f[0] + 19 * f[1] - 5 * f[2] + f[3]);
    if (j == n - 2) return h / 24.0 * (f[n - 4] - 5 * f[n - 3] + 19 * f[n - 2] + 9 * f[n - 1]);
    return h / 24.0 * (-f[j - 1] + 13 * f[j] + 13 * f[j + 1] - f[j + 2]);
}

}  // namespace

std::vector<double> primitive(std::span<const double> f, double h, int base) {
    const int n = static_cast<int>(f.size());
    if (n < 4) throw Error(ErrorKind::Stencil, "primitive needs at least 4 nodes");
    if (base < 0 || base >= n) throw Error(ErrorKind::InvalidArgument, "primitive base index out of range");
    std::vector<double> F(n, 0.0);
    for (int j = base; j < n - 1; ++j) F[j + 1] = F[j] + cell_integral(f, h, j);
    for (int j = base; j > 0; --j) F[j - 1] = F[j] - cell_integral(f, h, j - 1);
    return F;
}

Slice integrate_x(const Slice& s) {
    auto z = s.axis.zero_index();
    if (!z) throw Error(ErrorKind::InvalidArgument, "integrate_x: x = 0 is not a grid node");
    return integrate_x(s, *z);
}

Slice integrate_x(const Slice& s, int base_index) {
    return Slice(s.axis, primitive(s.values, s.axis.step, base_index));
}

double l2_norm(std::span<const double> f, double h) {
    double acc = 0.0;
    for (double v : f) acc += v * v;
    return std::sqrt(acc * h);
}

// ---------------------------------------------------------------------------
// Interpolation

namespace {

template <int N>
void lagrange_weights(double s, int first, double (&w)[N]) {
    // nodes at integer positions first .. first+N-1, evaluation at s
    for (int k = 0; k < N; ++k) {
        double num = 1.0;
        double den = 1.0;
        for (int m = 0; m < N; ++m) {
            if (m == k) continue;
            num *= s - (first + m);
            den *= static_cast<double>(k - m);
        }
        w[k] = num / den;
    }
}

}  // namespace

double interpolate(const Slice& s, double x) {
    const Axis& a = s.axis;
    const double pos = (x - a.start) / a.step;
    const double slack = 1e-9;
    if (pos < -slack || pos > a.size - 1 + slack) {
        throw Error(ErrorKind::DomainEscape,
                    "interpolation point " + format_double(x) + " outside [" +
                        format_double(a.start) + ", " + format_double(a.last()) + "]");
    }
    constexpr int N = 6;
    if (a.size < N) throw Error(ErrorKind::Stencil, "interpolation needs at least 6 nodes");
    const int cell = static_cast<int>(std::floor(pos));
    const int first = std::clamp(cell - 2, 0, a.size - N);
    double w[N];
    lagrange_weights<N>(pos, first, w);
    double acc = 0.0;
    for (int k = 0; k < N; ++k) acc += w[k] * s.values[first + k];
    return acc;
}

BicubicField::BicubicField(SampledField field) : field_(std::move(field)) {
    if (field_.nt() < 4 || field_.nx() < 4) {
        throw Error(ErrorKind::Stencil, "bicubic interpolation needs at least 4x4 samples");
    }
}

bool BicubicField::contains(double t, double x) const {
    const Grid& g = field_.grid();
    const double eps_t = 1e-9 * g.dt();
    const double eps_x = 1e-9 * g.h();
    return g.t().contains(t, eps_t) && g.x().contains(x, eps_x);
}

double BicubicField::operator()(double t, double x) const {
    const Grid& g = field_.grid();
    if (!contains(t, x)) {
        throw Error(ErrorKind::DomainEscape, "bicubic evaluation at (" + format_double(t) +
                                                 ", " + format_double(x) + ") outside samples");
    }
    constexpr int N = 4;
    const double pt = (t - g.t().start) / g.dt();
    const double px = (x - g.x().start) / g.h();
    const int ft = std::clamp(static_cast<int>(std::floor(pt)) - 1, 0, g.nt() - N);
    const int fx = std::clamp(static_cast<int>(std::floor(px)) - 1, 0, g.nx() - N);
    double wt[N];
    double wx[N];
    lagrange_weights<N>(pt, ft, wt);
    lagrange_weights<N>(px, fx, wx);
    double acc = 0.0;
    for (int a = 0; a < N; ++a) {
        double row = 0.0;
        for (int b = 0; b < N; ++b) row += wx[b] * field_(ft + a, fx + b);
        acc += wt[a] * row;
    }
    return acc;
}

// ---------------------------------------------------------------------------
// Residuals

void band_maxima(const SampledField& values, double& interior, double& boundary) {
    interior = 0.0;
    boundary = 0.0;
    const int nt = values.nt();
    const int nx = values.nx();
    for (int i = 0; i < nt; ++i) {
        const bool t_band = i < kBoundaryLevels || i >= nt - kBoundaryLevels;
        for (int j = 0; j < nx; ++j) {
            const bool x_band = j < kBoundaryNodes || j >= nx - kBoundaryNodes;
            const double v = std::abs(values(i, j));
            if (t_band || x_band) {
                boundary = std::max(boundary, v);
            } else {
                interior = std::max(interior, v);
            }
        }
    }
}

namespace {

ResidualField evolution_residual(const SampledField& u, bool modified) {
    if (u.nt() < 6) throw Error(ErrorKind::Stencil, "residual needs nt >= 6 for time stencils");
    const SampledField ut = deriv_t(u, 1);
    const SampledField ux = deriv_x(u, 1);
    const SampledField uxxx = deriv_x(u, 3);
    SampledField res(u.grid());
    for (int i = 0; i < u.nt(); ++i) {
        for (int j = 0; j < u.nx(); ++j) {
            const double v = u(i, j);
            const double nonlinear = modified ? 6.0 * v * v * ux(i, j) : 6.0 * v * ux(i, j);
            res(i, j) = ut(i, j) - nonlinear + uxxx(i, j);
        }
    }
    ResidualField out{std::move(res), 0.0, 0.0};
    band_maxima(out.values, out.interior_max, out.boundary_max);
    return out;
}

}  // namespace

ResidualField kdv_residual(const SampledField& q) { return evolution_residual(q, false); }
ResidualField mkdv_residual(const SampledField& r) { return evolution_residual(r, true); }

// ---------------------------------------------------------------------------
// CSV

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_csv(const SampledField& f, std::ostream& out) {
    out << "t,x,value\n";
    const Grid& g = f.grid();
    for (int i = 0; i < f.nt(); ++i) {
        const std::string t = format_double(g.t().at(i));
        for (int j = 0; j < f.nx(); ++j) {
            out << t << ',' << format_double(g.x().at(j)) << ',' << format_double(f(i, j)) << '\n';
        }
    }
}

void write_csv(const SampledField& f, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::InvalidArgument, "cannot open " + path + " for writing");
    write_csv(f, out);
}

void write_csv(const Slice& s, std::ostream& out) {
    out << "x,value\n";
    for (int j = 0; j < s.size(); ++j) {
        out << format_double(s.axis.at(j)) << ',' << format_double(s.values[j]) << '\n';
    }
}

Slice read_slice_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Parse, "cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("x,value", 0) != 0) {
        throw Error(ErrorKind::Parse, path + ": expected header `x,value`");
    }
    std::vector<double> xs;
    std::vector<double> vs;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw Error(ErrorKind::Parse, path + ": malformed row `" + line + "`");
        try {
            xs.push_back(std::stod(line.substr(0, comma)));
            vs.push_back(std::stod(line.substr(comma + 1)));
        } catch (const std::exception&) {
            throw Error(ErrorKind::Parse, path + ": malformed row `" + line + "`");
        }
    }
    if (xs.size() < 16) throw Error(ErrorKind::Parse, path + ": need at least 16 rows");
    const double h = (xs.back() - xs.front()) / (xs.size() - 1);
    if (!(h > 0)) throw Error(ErrorKind::Parse, path + ": x must increase");
    for (std::size_t j = 0; j < xs.size(); ++j) {
        if (std::abs(xs[j] - (xs.front() + j * h)) > 1e-9 * std::max(1.0, std::abs(h) * xs.size())) {
            throw Error(ErrorKind::Parse, path + ": nonuniform grids are not supported");
        }
    }
    Axis a{xs.front(), h, static_cast<int>(xs.size())};
    // snap the stored nodes exactly onto 0 when a row sits there
    const long j0 = std::lround(-a.start / h);
    if (j0 >= 0 && j0 < a.size && std::abs(xs[j0]) < 1e-9 * h) a.start = -(j0 * h);
    return Slice(a, std::move(vs));
}

}  // namespace qlp
