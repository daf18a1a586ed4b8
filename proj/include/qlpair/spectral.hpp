#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"
#include "qlpair/characteristics.hpp"
#include "qlpair/field.hpp"
#include "qlpair/kdv.hpp"

namespace qlp {

/// Dirichlet operator W^{-1} K on the interior nodes of an axis: K is a
/// symmetric tridiagonal stiffness matrix, W = diag(weight) (identity when
/// absent). Self-adjoint in the weighted inner product sum w u v h.
struct TridiagonalOperator {
    std::vector<double> diagonal;      // K_jj
    std::vector<double> off_diagonal;  // K_{j,j+1}
    double h = 0.0;
    Axis axis;                         // interior nodes only
    std::optional<std::vector<double>> weight;

    int size() const { return static_cast<int>(diagonal.size()); }
    /// W^{-1} K u, with zero values beyond both ends.
    std::vector<double> apply(std::span<const double> u) const;
    double inner(std::span<const double> u, std::span<const double> v) const;
    /// W^{-1/2} K W^{-1/2}: symmetric, same eigenvalues.
    void symmetric(std::vector<double>& d, std::vector<double>& e) const;
};

/// -u'' + q u with the 3-point Laplacian; the end nodes of q's axis carry
/// the Dirichlet condition.
TridiagonalOperator discretize_schrodinger(const Slice& q);

/// -(rho^2 u')' / rho^2 with rho^2 = exp(2 int r), normalized to 1 at the
/// node nearest x = 0. Half-node weights are geometric means.
TridiagonalOperator discretize_impedance(const Slice& r);

/// Largest run of nodes around the normalization node on which
/// rho^2 stays in [1/range, range].
Slice impedance_window(const Slice& r, double range = 1e8);

struct Window {
    double lo = 0.0;
    double hi = 0.0;
};

struct SpectrumResult {
    Window window;
    double tol = 0.0;
    std::vector<double> eigenvalues;  // distinct, ascending
    std::vector<int> multiplicities;
    int count_below = 0;              // eigenvalues below window.lo
};

/// Number of eigenvalues strictly below mu (negative pivots of the
/// shifted LDL^T factorization).
int sturm_count(const TridiagonalOperator& op, double mu);

/// Every eigenvalue in the window to +-tol by Sturm bisection. Throws
/// InvalidArgument when an edge is within tol of an eigenvalue.
SpectrumResult eigen_bisect(const TridiagonalOperator& op, Window window, double tol = 1e-12);

/// Eigenvector of W^{-1} K for a computed eigenvalue: inverse iteration,
/// then one damped Jacobi sweep. Normalized in the weighted norm.
std::vector<double> eigenvector(const TridiagonalOperator& op, double lambda);

/// max(|u_first|, |u_last|) / max |u|.
double edge_amplitude(std::span<const double> u);

struct BoundState {
    double lambda = 0.0;
    Slice psi;  // on q's axis, zero at both ends, unit L2 norm, positive peak
};

/// Lowest eigenpair of -d^2/dx^2 + q inside the window.
BoundState bound_state(const Slice& q, Window window);

/// Real solution of -psi'' + q psi = lambda psi by Numerov's method from
/// the right end, started from the given values at the last two nodes.
Slice shoot(const Slice& q, double lambda, double psi_last, double psi_before_last);

// ---------------------------------------------------------------------------
// Spectrum comparison across times

struct SpectrumOptions {
    double tol = 1e-12;
    /// Pairing tolerance; eigenvalues further apart than 10x are unpaired.
    double pair_tol = 1e-5;
    /// Also solve on every second node and extrapolate (4 l_h - l_2h) / 3.
    bool richardson = true;
};

struct SpectrumReport {
    std::vector<double> times;
    std::vector<std::vector<double>> eigenvalues;  // compared values
    std::vector<std::vector<double>> raw;          // at the given spacing
    std::vector<std::vector<int>> multiplicities;
    double max_pair_dev = 0.0;
    bool paired = true;
    bool multiplicities_agree = true;
    bool extrapolated = false;
    double edge_amplitude = 0.0;  // worst over all eigenvectors
    std::string message;
};

nlohmann::json to_json(const SpectrumReport& r);

/// Spectra of -d^2/dx^2 + q(t) at the given times, paired greedily by
/// nearest neighbour.
SpectrumReport spectrum_invariance(const std::vector<Slice>& q, std::vector<double> times, Window window,
                                   const SpectrumOptions& opt = {});
/// Rows of q at the requested times (each must be a time level).
SpectrumReport spectrum_invariance(const SampledField& q, std::vector<double> times, Window window,
                                   const SpectrumOptions& opt = {});
SpectrumReport spectrum_invariance(const KdvSolution& q, const Axis& x, std::vector<double> times, Window window,
                                   const SpectrumOptions& opt = {});

// ---------------------------------------------------------------------------
// Transport of eigenfunctions

struct EigenTransport {
    SampledField psi;
    std::vector<double> eigen_residual;  // ||(L(t) - lambda) psi|| / ||psi|| per level
    std::vector<double> norm_ratio;      // ||psi(t)|| / ||psi(t0)||
    double max_residual = 0.0;
    double min_ratio = 0.0;
    double max_ratio = 0.0;
};

/// psi_t = (4 lambda + 2q) psi_x - q_x psi along characteristics. Norms
/// and residuals skip `band` nodes at each end.
EigenTransport transport_eigenfunction(const KdvSolution& q, const Profile& psi0, double lambda, const Grid& grid,
                                       const TraceOptions& opt = {}, int band = 4);

// ---------------------------------------------------------------------------
// Impedance operator

struct ConjugationOptions {
    int battery = 20;
    std::uint64_t seed = 20240611;
    double rho_range = 1e8;
    Window window{-1.0, 2.0};
    double tol = 1e-12;
};

struct ConjugationReport {
    Axis axis;                     // assembled window
    double residual = 0.0;         // max ||rho T u - L (rho u)|| / ||rho u|| over the battery
    double residual_over_h2 = 0.0;
    int battery = 0;
    std::uint64_t seed = 0;
    std::vector<double> t_spectrum;
    std::vector<double> l_spectrum;
    double spectrum_dev = 0.0;     // max paired difference; inf on count mismatch
    double edge_amplitude = 0.0;   // Dirichlet truncation indicator
};

nlohmann::json to_json(const ConjugationReport& r);

ConjugationReport impedance_conjugation(const Slice& r, const ConjugationOptions& opt = {});

/// Spectra of the impedance operator of r(t) on each time's window.
SpectrumReport impedance_invariance(const SampledField& r, std::vector<double> times, Window window,
                                    const SpectrumOptions& opt = {}, double rho_range = 1e8);

// ---------------------------------------------------------------------------
// Lax evolution

struct FreeEvolution {
    Slice psi;
    double norm_ratio = 1.0;
};

/// psi_t = -4 psi_xxx exactly through the multiplier exp(4 i k^3 t). The
/// axis size must be a power of two and psi0 must vanish at both ends
/// (relative 1e-12).
FreeEvolution lax_evolution_free(const Slice& psi0, double t);

struct LaxConjugation {
    double residual = 0.0;  // ||Psi(t) L(0) psi0 - L(t) Psi(t) psi0|| / ||psi0||
    double norm_ratio = 1.0;
    int steps = 0;
};

/// Evolves psi0 and L(0) psi0 under psi_t = (-4 d^3 + 6 q d + 3 q_x) psi on
/// psi0's (periodic) axis: spectral derivatives, integrating-factor RK4.
/// `steps` = 0 picks a stable count.
LaxConjugation lax_conjugation_check(const KdvSolution& q, const Slice& psi0, double t, int steps = 0);

}  // namespace qlp
