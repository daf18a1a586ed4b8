#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <vector>

#include "qlpair/field.hpp"

namespace qlp {

/// Closed rectangle in (t, x) on which sampled data is defined.
struct Region {
    double t_lo, t_hi, x_lo, x_hi;

    bool contains(double t, double x) const {
        return t >= t_lo && t <= t_hi && x >= x_lo && x <= x_hi;
    }
};

std::optional<Region> intersect(const std::optional<Region>& a, const std::optional<Region>& b);

/// Real function of (t, x): either a closed form defined everywhere or
/// bicubic interpolation of samples, defined on the sample rectangle.
class SpaceTimeFunction {
public:
    using Fn = std::function<double(double, double)>;

    explicit SpaceTimeFunction(Fn f);
    explicit SpaceTimeFunction(BicubicField field);
    static SpaceTimeFunction constant(double c);

    double operator()(double t, double x) const { return f_(t, x); }
    const std::optional<Region>& domain() const { return domain_; }

private:
    Fn f_;
    std::optional<Region> domain_;
    std::shared_ptr<const BicubicField> field_;
};

/// Coefficients of u_t = a u_x + b u. Evaluated jointly because closed
/// forms usually share most of the work between a and b; the batch form
/// evaluates many x at one t.
class CoefficientPair {
public:
    using Joint = std::function<void(double t, double x, double& a, double& b)>;
    using Batch = std::function<void(double t, std::span<const double> x, std::span<double> a,
                                     std::span<double> b)>;

    CoefficientPair(SpaceTimeFunction a, SpaceTimeFunction b);
    explicit CoefficientPair(Joint joint, std::optional<Region> domain = std::nullopt);
    CoefficientPair(Joint joint, Batch batch, std::optional<Region> domain);

    void operator()(double t, double x, double& a, double& b) const { joint_(t, x, a, b); }
    void operator()(double t, std::span<const double> x, std::span<double> a, std::span<double> b) const {
        batch_(t, x, a, b);
    }
    double a(double t, double x) const;
    const std::optional<Region>& domain() const { return domain_; }

private:
    Joint joint_;
    Batch batch_;
    std::optional<Region> domain_;
};

/// Profile at the initial time: a closed-form function or samples.
class Profile {
public:
    explicit Profile(std::function<double(double)> f);
    explicit Profile(Slice samples);

    double operator()(double x) const;
    bool sampled() const { return samples_.has_value(); }
    const Slice& samples() const { return *samples_; }

    /// Samples on the axis; for sampled profiles the axis must lie inside.
    Slice on(const Axis& axis) const;

private:
    std::function<double(double)> f_;
    std::optional<Slice> samples_;
};

struct TraceOptions {
    /// Fixed RK4 step count per trace; 0 picks ceil(|dt| / max_step).
    int substeps = 0;
    double max_step = 1e-3;
    /// Require sampled coefficient windows to be wide enough for the
    /// a-priori spread of characteristics.
    bool enforce_padding = true;
    /// Sampled linear-growth check before solving.
    bool check_growth = true;
};

int substeps_for(double dt, const TraceOptions& opt);

/// x and the accumulated integral of b along one characteristic.
struct PathPoint {
    double x;
    double integral;
};

/// Classical RK4 for x' = -a(t, x) from t_from to t_to (either direction),
/// carrying I' = b(t, x). Throws DomainEscapeError if a stage leaves the
/// coefficient domain.
PathPoint trace_path(const CoefficientPair& c, double t_from, double x0, double t_to, int substeps);

double trace(const CoefficientPair& c, double t_from, double x0, double t_to, int substeps);
double trace(const SpaceTimeFunction& a, double t_from, double x0, double t_to, int substeps);

/// Feet of the backward characteristics through every grid node and the
/// integral of b along each of them, from t0 = grid.t().start.
struct FootTable {
    Grid grid;
    SampledField foot;      // xi(t0; t_i, x_j)
    SampledField integral;  // int_{t0}^{t_i} b(tau, xi(tau; t_i, x_j)) dtau
};

FootTable trace_feet(const CoefficientPair& c, const Grid& grid, const TraceOptions& opt = {});

/// u(t, x) = u0(foot) * exp(int b) on the grid.
SampledField solve_first_order(const CoefficientPair& c, const Profile& u0, const Grid& grid,
                               const TraceOptions& opt = {});

/// s(t, x) = s0(foot) + int eta along the path.
SampledField solve_inhomogeneous(const SpaceTimeFunction& a, const SpaceTimeFunction& eta,
                                 const Profile& s0, const Grid& grid,
                                 const TraceOptions& opt = {});

/// Forward flow from an origin time: xi[t_i][x_j] = xi(t_i; t', x_j).
struct CharacteristicTable {
    double origin;
    Grid grid;            // x-axis: start positions, t-axis: target times
    SampledField xi;
    SampledField xi_x;    // from the exponential formula when available
};

/// Traces every start position to every target time of the grid. The
/// origin is grid.t().start. b of the pair is integrated and reported as
/// exp(-int b) in xi_x, so passing b = a_x yields the Jacobian.
CharacteristicTable characteristic_table(const CoefficientPair& c, const Grid& grid,
                                         const TraceOptions& opt = {});

/// Centered differences of xi in x on each row.
SampledField jacobian_fd(const CharacteristicTable& table);

struct JacobianCheck {
    SampledField formula;
    SampledField finite_difference;
    double max_deviation;
    bool consistent;  // false when the deviation exceeds 100x tolerance
};

JacobianCheck compare_jacobians(const CharacteristicTable& table, double tol);

void write_csv(const CharacteristicTable& table, std::ostream& out);

struct GrowthReport {
    double c1 = 0.0;
    double c2 = 0.0;
    double min_abs_xi = 0.0;
    int samples = 0;
    bool pass = false;
};

/// Fits C1 |x| <= |xi(t; t', x)| <= C2 |x| over sampled (t, t', x) with
/// |x| >= n_floor inside `window` and times inside [t_lo, t_hi].
GrowthReport check_growth_bounds(const CoefficientPair& c, const Region& window, double n_floor,
                                 int n_times = 5, int n_space = 21);

/// Linear-growth constant max |a| / |x| over |x| >= 1 on sampled points.
double growth_constant(const CoefficientPair& c, const Region& window, int n_t = 11, int n_x = 401);

/// Soft superlinearity detector: throws ErrorKind::Growth when |a|/|x|
/// keeps increasing towards both ends of the window and the outermost
/// ratio exceeds 1.5x the inner maximum.
void check_linear_growth(const CoefficientPair& c, const Region& window);

/// Throws InvalidArgument if sampled coefficients do not cover the
/// symmetric window R e^{2 C_T T} required for output nodes in `grid`.
void check_padding(const CoefficientPair& c, const Grid& grid);

}  // namespace qlp
