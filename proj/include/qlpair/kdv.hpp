#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "qlpair/characteristics.hpp"
#include "qlpair/field.hpp"

namespace qlp {

/// Parsed node of the spec mini-language:
///   name [":" key "=" value ("," key "=" value)*] ["(" spec ")"]
struct SpecNode {
    std::string name;
    std::map<std::string, std::string> params;
    std::shared_ptr<SpecNode> inner;

    double number(const std::string& key, std::optional<double> fallback = std::nullopt) const;
    std::string text(const std::string& key) const;
    /// Throws Parse if a parameter outside `allowed` is present.
    void require_keys(std::initializer_list<const char*> allowed) const;
};

SpecNode parse_spec(const std::string& text);
std::string to_string(const SpecNode& node);

struct KdvSpec {
    enum class Kind { Zero, Constant, Soliton, Boosted, Numeric };

    Kind kind = Kind::Zero;
    double c = 0.0;       // constant value or boost velocity
    double kappa = 1.0;
    double x0 = 0.0;
    std::shared_ptr<KdvSpec> inner;
    std::optional<Slice> q0;

    static KdvSpec zero();
    static KdvSpec constant(double c);
    static KdvSpec soliton(double kappa, double x0 = 0.0);
    static KdvSpec boosted(KdvSpec inner, double c);
    static KdvSpec numeric(Slice q0);

    bool closed_form() const;
};

/// Builds a spec from mini-language text; `numeric:file=...` reads a CSV.
KdvSpec kdv_spec_from(const SpecNode& node);
KdvSpec parse_kdv_spec(const std::string& text);

struct NumericOptions {
    /// RK4 steps per output level; raised automatically for stability.
    int substeps = 1;
    /// Required decay at the edges of q0.
    double edge_tol = 1e-12;
    /// Return the whole periodic box instead of q0's window.
    bool keep_padding = false;
};

/// Pseudo-spectral KdV integration of decaying data on q0's axis from
/// t = 0 to t_max with nt output levels. The axis size must be a power of
/// two; the periodic box is twice as wide, with zeros outside q0's window.
SampledField solve_numeric(const Slice& q0, double t_max, int nt, const NumericOptions& opt = {});

/// Every closed form reduces to offset + soliton(t, x + 6 drift t).
struct ClosedKdv {
    double offset = 0.0;
    double drift = 0.0;
    bool soliton = false;
    double kappa = 1.0;
    double x0 = 0.0;

    void eval(double t, double x, double& q, double& qx) const {
        q = offset;
        qx = 0.0;
        if (!soliton) return;
        const double y = kappa * (x + 6.0 * drift * t - x0 - 4.0 * kappa * kappa * t);
        // sech^2 and tanh from a single exponential
        const double e = std::exp(-2.0 * std::abs(y));
        const double s2 = 4.0 * e / ((1.0 + e) * (1.0 + e));
        const double th = std::copysign((1.0 - e) / (1.0 + e), y);
        q += -2.0 * kappa * kappa * s2;
        qx = 4.0 * kappa * kappa * kappa * s2 * th;
    }
};

/// A KdV solution that can be evaluated off-grid: q and q_x together.
class KdvSolution {
public:
    using Joint = std::function<void(double t, double x, double& q, double& qx)>;
    using Batch = std::function<void(double t, std::span<const double> x, std::span<double> q,
                                     std::span<double> qx)>;

    KdvSolution(Joint joint, std::optional<Region> domain, std::string label);
    KdvSolution(const ClosedKdv& closed, std::string label);

    /// Closed forms evaluate exactly; numeric specs are solved on `grid`
    /// (t from 0) and interpolated.
    static KdvSolution from_spec(const KdvSpec& spec, const Grid* grid = nullptr,
                                 const NumericOptions& opt = {});
    /// Bicubic interpolation of q and of its sampled x-derivative.
    static KdvSolution from_samples(const SampledField& q);

    void eval(double t, double x, double& q, double& qx) const { joint_(t, x, q, qx); }
    void eval(double t, std::span<const double> x, std::span<double> q, std::span<double> qx) const {
        batch_(t, x, q, qx);
    }
    const std::optional<ClosedKdv>& closed() const { return closed_; }
    double q(double t, double x) const;
    double q_x(double t, double x) const;

    SampledField sample(const Grid& grid) const;
    Slice sample(const Axis& x, double t) const;
    const std::optional<Region>& domain() const { return domain_; }
    const std::string& label() const { return label_; }

    /// q(t, x + 6ct) + c.
    KdvSolution boosted(double c) const;

    /// a = 4 lambda + 2q, b = -q_x: the transport of kernel elements.
    CoefficientPair transport_coefficients(double lambda) const;
    /// a = 4 lambda + 2q, b = a_x = 2 q_x: forward flow with its Jacobian.
    CoefficientPair flow_coefficients(double lambda) const;
    /// a = 4 lambda + 2q, b = 0.
    SpaceTimeFunction speed(double lambda) const;

private:
    CoefficientPair coefficients(double lambda, double b_scale) const;

    Joint joint_;
    Batch batch_;
    std::optional<ClosedKdv> closed_;
    std::optional<Region> domain_;
    std::string label_;
};

/// Samples the spec on the grid (numeric specs are solved there).
SampledField evaluate(const KdvSpec& spec, const Grid& grid);

/// q(t, x + 6ct) + c on the target x-axis and q's time levels; the source
/// must cover the shifted window, otherwise DomainEscape.
SampledField galilean_boost(const SampledField& q, double c, const Axis& x_out);

/// Mass and energy integrals on a row.
double mass(std::span<const double> q, double h);
double energy(std::span<const double> q, double h);

}  // namespace qlp
