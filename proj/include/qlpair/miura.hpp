#pragma once

#include <optional>
#include <vector>

#include "json.hpp"
#include "qlpair/characteristics.hpp"
#include "qlpair/field.hpp"
#include "qlpair/kdv.hpp"

namespace qlp {

/// r_x + r^2
Slice miura_map(const Slice& r);
SampledField miura_map(const SampledField& r);

/// log psi0 = int_0^x r0, stored in log form; the axis needs a node at 0.
Slice log_psi_initial(const Slice& r0);
/// exp of the above; psi0(0) = 1.
Slice psi_initial(const Slice& r0);

/// Transport under Q_lambda: a = 4 lambda + 2q, b = -q_x.
SampledField transport_psi(const KdvSolution& q, const Profile& psi0, const Grid& grid,
                           double lambda = 0.0, const TraceOptions& opt = {});
/// Same equation for p = log psi: p = p0(foot) - int q_x along the path.
SampledField transport_log_psi(const KdvSolution& q, const Profile& log_psi0, const Grid& grid,
                               double lambda = 0.0, const TraceOptions& opt = {});

struct PipelineOptions {
    double gate_tol = 1e-6;
    double lambda = 0.0;
    /// Build the second kernel element and report Wronskian drift.
    bool wronskian = true;
    TraceOptions trace;
};

struct PipelineDiagnostics {
    double gate_deviation = 0.0;
    double min_psi = 0.0;
    double kernel_residual = 0.0;           // max |-psi_xx + (q - lambda) psi|
    double kernel_residual_relative = 0.0;  // the same divided by psi
    std::optional<double> mkdv_residual;    // needs nt >= 6
    std::optional<double> wronskian_drift;  // skipped when psi would overflow
};

nlohmann::json to_json(const PipelineDiagnostics& d);

struct PipelineResult {
    SampledField q;
    SampledField log_psi;
    SampledField r;
    PipelineDiagnostics diagnostics;
    std::optional<SampledField> phi_over_psi;  // second kernel element, as a ratio

    SampledField psi() const;
};

/// Recovers the mKdV solution r = psi_x / psi with psi transported from
/// psi0 = exp(int_0^x r0). Throws ErrorKind::MiuraGate if r0 is not on the
/// Miura fiber of q(t0) - lambda.
PipelineResult invert_miura_flow(const Profile& r0, const KdvSolution& q, const Grid& grid,
                                 const PipelineOptions& opt = {});
/// Sampled inputs; output on x_out at q's time levels. q's window must hold
/// every backward characteristic and r0's axis every foot.
PipelineResult invert_miura_flow(const Slice& r0, const SampledField& q, const Axis& x_out,
                                 const PipelineOptions& opt = {});

struct RhoCheck {
    SampledField log_rho;
    std::vector<double> log_rho0;  // per time level
    double max_dev;                // max |rho - psi| / psi
};

/// rho = rho0(t) exp(int_0^x r) with rho0(t) = exp(int_0^t (2r^3 - r_xx)(tau, 0)).
RhoCheck rho_crosscheck(const SampledField& r, const SampledField& log_psi);

struct WronskianReport {
    SampledField w;
    double reference;  // W(t0, 0)
    double drift;      // max |W - reference| / max(1, |reference|)
};

/// phi psi_x - psi phi_x on a shared grid.
WronskianReport wronskian(const SampledField& phi, const SampledField& psi);

struct CommutatorReport {
    double lambda;
    double identity_residual;  // with the KdV(q) term; vanishes for any q
    double lax_residual;       // without it; vanishes iff q solves KdV
    double kdv_term_norm;      // ||KdV(q) phi|| / ||phi||
};

/// Checks q_t phi = [Q_l, L_l] phi + 4 q_x L_l phi + KdV(q) phi on interior
/// time levels; norms are relative to ||phi||, maximized over levels.
std::vector<CommutatorReport> commutator_check(const SampledField& q, const Slice& testfn,
                                               const std::vector<double>& lambdas = {0.0, 0.7, -0.7, 1.0});

/// || A phi - (Q_l phi + 4 d/dx (L_l phi)) || / ||phi|| at one time level.
double factorization_check(const Slice& q, double lambda, const Slice& testfn);

/// L2 norm over nodes at least `band` away from either end.
double interior_l2(std::span<const double> f, double h, int band);

}  // namespace qlp
