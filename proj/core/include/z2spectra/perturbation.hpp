#pragma once

#include <array>
#include <vector>

#include <Eigen/Dense>

#include "z2spectra/expansion.hpp"
#include "z2spectra/geometry.hpp"
#include "z2spectra/laplace.hpp"
#include "z2spectra/mesh.hpp"

namespace z2s {

/// B[i][k] = scale·(π/2)·Σ_p Re(v_p a_p(f_i) a_p(f_k)) on a window basis.
struct PerturbationForm {
    Eigen::MatrixXd B;
    ConfigTangent v;
};

PerturbationForm bilinear_form(const std::vector<Eigen::VectorXcd>& traces, const ConfigTangent& v,
                               double scale = 1.0);

/// First-order eigenvalue slope of a simple eigenvalue with M-normalized section.
double simple_derivative(const Eigen::VectorXcd& trace, const ConfigTangent& v, double scale = 1.0);

/// Eigenvalues of B, ascending.
std::vector<double> predicted_splitting(const PerturbationForm& form);

/// Mesh moved onto a nearby configuration by the equivariant cap deformation.
/// Degrees of freedom keep their meaning, so sections can be compared directly.
TwistedMesh transported_mesh(const TwistedMesh& reference, const Configuration& from, const Configuration& to);

/// Branch slopes from windows at p ± t: slope i pairs branch i at +t with
/// branch N-1-i at -t, which is the same analytic branch when the window is
/// split linearly. Throws WindowDrift when the window count changes.
std::vector<double> paired_slopes(const std::vector<double>& plus, const std::vector<double>& minus, double t);

/// Slopes the first-order model predicts for the same pairing: eigenvalues of
/// diag(values) ± t·B. Accounts for any residual splitting of the discrete window.
std::vector<double> predicted_paired_slopes(const std::vector<double>& values, const Eigen::MatrixXd& B, double t);

/// Directional derivative of a section along the Killing field x ↦ e_i × x
/// (i = 0, 1, 2), computed per element and mass-averaged back to vertices.
Eigen::VectorXd rotational_derivative(const TwistedMesh& m, const DiscreteOperatorPair& ops,
                                      const Eigen::VectorXd& f, int i);

struct WindowDerivative {
    Eigen::VectorXd raw;
    Eigen::VectorXd projected;  // M-orthogonal projection onto the window span
    double closure = 0.0;       // ‖projected‖_M / ‖raw‖_M
    double commutator = 0.0;    // M-norm share of raw outside the window
};

WindowDerivative window_rotational_derivative(const TwistedMesh& m, const DiscreteOperatorPair& ops,
                                              const SpectralWindow& win, const Eigen::VectorXd& f, int i);

/// Realified Γ = (3/2)·diag(b): (Γv)_j = (3/2) b_j v_j.
Eigen::MatrixXd gamma_matrix(const Eigen::VectorXcd& b);

/// Columns are the realified rotation generators.
Eigen::MatrixXd h1_basis(const Configuration& p);

/// Principal angles (radians, ascending) between the column spans of a and b.
std::vector<double> principal_angles(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

struct SubspacePair {
    Eigen::MatrixXd H1;       // 4n × 3, realified generators
    Eigen::MatrixXd H2;       // 4n × 3, realified traces of L_i f0
    Eigen::MatrixXd gamma_H1; // Γ applied to H1
    std::vector<double> angles;
    double h1_smin = 0.0;
    double h2_smin = 0.0;
};

/// Throws RankDeficient when either basis has relative rank below 3.
SubspacePair h_subspaces(const Configuration& p, const std::array<Eigen::VectorXcd, 3>& rotational_traces,
                         const Eigen::VectorXcd& b, double rank_tol = 1e-3);

struct ConstantCalibration {
    double scale = 1.0;  // observed / predicted
    double predicted = 0.0;
    double observed = 0.0;
    double delta = 0.3;
    double eigenvalue = 0.0;
};

/// Two points at (sin δ, 0, ±cos δ); both move so that δ grows. Compares the
/// formula for the lowest (simple) eigenvalue with a centred difference of re-solves.
ConstantCalibration calibrate_constant(const MeshParams& params, double delta = 0.3, double step = 1e-3);

/// The eigenvalue branch that continues f0 along t ↦ exp_step(p, v, t) on
/// transported meshes, measured as the Rayleigh quotient of f0 projected onto
/// the window at t. This differs from the branch eigenvalue by O(t²) times
/// the window spread and is unaffected by avoided crossings inside the window.
struct BranchProfile {
    double base = 0.0;  // value at t = 0
    std::vector<double> steps;
    std::vector<double> shifts;    // λ(t) - base
    std::vector<double> overlaps;  // ‖P_t f0‖_M / ‖f0‖_M, share of f0 kept by the window
};

BranchProfile critical_branch(const TwistedMesh& m, const Configuration& p, const SpectralWindow& win,
                              const Eigen::VectorXd& f0, const ConfigTangent& v, const std::vector<double>& steps,
                              const SolverOptions& solver = {});

/// Least-squares fit of branch shifts by c2 t² + c3 t³ + c4 t⁴ (no constant or
/// linear term). r2 is the uncentred coefficient of determination of that
/// model; linear_slope comes from the same fit with a linear term added.
struct StationarityFit {
    double r2 = 0.0;
    double linear_slope = 0.0;
    std::vector<double> coefficients;  // c2, c3, c4
    double bound_constant = 0.0;       // max |shift| / t²
};

StationarityFit stationarity_fit(const std::vector<double>& steps, const std::vector<double>& shifts);

}  // namespace z2s
