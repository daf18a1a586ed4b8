#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "qlpair/error.hpp"

namespace qlp {

/// Uniform 1D node set: at(j) = start + j * step, j = 0 .. size-1.
struct Axis {
    double start = 0.0;
    double step = 1.0;
    int size = 0;

    double at(int j) const { return start + j * step; }
    double last() const { return at(size - 1); }
    bool contains(double x, double slack = 0.0) const {
        return x >= start - slack && x <= last() + slack;
    }
    /// Index of the node at x = 0 (within 1e-12), if any.
    std::optional<int> zero_index() const;
    std::vector<double> nodes() const;

    /// Axis with the same spacing extended by `left` and `right` nodes.
    Axis extended(int left, int right) const;

    /// Uniform axis on [lo, hi] with n nodes; when 0 lies inside, the axis
    /// is shifted by less than half a step so that 0 is exactly a node.
    static Axis snapped(double lo, double hi, int n);
};

bool same_axis(const Axis& a, const Axis& b, double tol = 1e-12);

/// Rectangular (t, x) grid. Uniform in both directions.
class Grid {
public:
    Grid(double x_min, double x_max, int nx, double t0, double t_max, int nt);
    Grid(Axis x, Axis t);

    const Axis& x() const { return x_; }
    const Axis& t() const { return t_; }
    int nx() const { return x_.size; }
    int nt() const { return t_.size; }
    double h() const { return x_.step; }
    double dt() const { return t_.step; }

private:
    Axis x_;
    Axis t_;
};

/// Real samples on an x-axis.
struct Slice {
    Axis axis;
    std::vector<double> values;

    Slice() = default;
    Slice(Axis a, std::vector<double> v);

    static Slice sample(const Axis& a, const std::function<double(double)>& f);

    int size() const { return axis.size; }
    double operator[](int j) const { return values[j]; }
};

/// Real samples on a (t, x) grid, row-major [time][space].
class SampledField {
public:
    SampledField(Grid grid, std::vector<double> values);
    explicit SampledField(Grid grid);  // zero-filled

    static SampledField sample(const Grid& grid,
                               const std::function<double(double, double)>& f);

    const Grid& grid() const { return grid_; }
    int nt() const { return grid_.nt(); }
    int nx() const { return grid_.nx(); }

    double operator()(int i, int j) const { return values_[index(i, j)]; }
    double& operator()(int i, int j) { return values_[index(i, j)]; }

    std::span<const double> row(int i) const;
    std::span<double> row(int i);
    Slice slice(int i) const;
    const std::vector<double>& values() const { return values_; }

    /// Throws Numerical if any value is NaN or infinite.
    void require_finite(const char* what) const;

private:
    std::size_t index(int i, int j) const {
        return static_cast<std::size_t>(i) * grid_.nx() + j;
    }

    Grid grid_;
    std::vector<double> values_;
};

// ---------------------------------------------------------------------------
// Finite differences

/// 4th-order accurate derivative of the given order (1..4) of uniformly
/// spaced samples: central stencils inside, one-sided near the ends.
std::vector<double> derivative(std::span<const double> f, double h, int order);

Slice deriv_x(const Slice& f, int order);
SampledField deriv_x(const SampledField& f, int order);
SampledField deriv_t(const SampledField& f, int order);

/// Finite-difference weights for the derivative of the given order at 0
/// from samples at integer offsets (unit spacing).
std::vector<double> fd_weights(std::span<const int> offsets, int order);

// ---------------------------------------------------------------------------
// Quadrature

/// Cumulative primitive F with F[base] = 0; exact on cubics.
std::vector<double> primitive(std::span<const double> f, double h, int base);

/// Primitive normalized at x = 0; the axis must have a node at 0.
Slice integrate_x(const Slice& s);
Slice integrate_x(const Slice& s, int base_index);

/// Composite trapezoid sum(f) * h, used for discrete L2 norms.
double l2_norm(std::span<const double> f, double h);

// ---------------------------------------------------------------------------
// Interpolation

/// Local 6-point Lagrange interpolation; x must lie within the axis.
double interpolate(const Slice& s, double x);

/// Tensor-product cubic (4x4 Lagrange) interpolation of a sampled field.
class BicubicField {
public:
    explicit BicubicField(SampledField field);

    double operator()(double t, double x) const;
    bool contains(double t, double x) const;
    const SampledField& field() const { return field_; }

private:
    SampledField field_;
};

// ---------------------------------------------------------------------------
// Residuals

/// Boundary bands excluded from the interior maximum.
inline constexpr int kBoundaryNodes = 2;
inline constexpr int kBoundaryLevels = 2;

struct ResidualField {
    SampledField values;
    double interior_max = 0.0;
    double boundary_max = 0.0;
};

/// q_t - 6 q q_x + q_xxx
ResidualField kdv_residual(const SampledField& q);
/// r_t - 6 r^2 r_x + r_xxx
ResidualField mkdv_residual(const SampledField& r);

/// Interior / boundary maxima of |values| with the standard bands.
void band_maxima(const SampledField& values, double& interior, double& boundary);

// ---------------------------------------------------------------------------
// CSV

/// Header `t,x,value`, row-major over (t, x), %.17g.
void write_csv(const SampledField& f, std::ostream& out);
void write_csv(const SampledField& f, const std::string& path);

/// Header `x,value`.
void write_csv(const Slice& s, std::ostream& out);
Slice read_slice_csv(const std::string& path);

std::string format_double(double v);

}  // namespace qlp
