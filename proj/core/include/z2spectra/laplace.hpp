#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "z2spectra/mesh.hpp"

namespace z2s {

using SparseMatrix = Eigen::SparseMatrix<double>;

enum class MassQuadrature {
    OnePoint,    // lumped, area/3 per vertex
    ThreePoint,  // consistent P1 mass
};

struct AssemblyOptions {
    MassQuadrature quadrature = MassQuadrature::ThreePoint;
    int threads = 1;
};

/// Stiffness and mass of the sign-twisted P1 discretization.
///
/// A global degree of freedom stores the section value at a vertex in a
/// vertex frame; triangle t sees it multiplied by corner_sign[t][i]. Branch
/// vertices carry no degree of freedom (the section vanishes there).
struct DiscreteOperatorPair {
    SparseMatrix K;
    SparseMatrix M;
    std::vector<int> dof_of_vertex;  // -1 at branch vertices
    std::vector<int> vertex_of_dof;
    std::vector<std::array<std::int8_t, 3>> corner_sign;
    std::vector<int> constrained;

    Eigen::Index size() const { return K.rows(); }

    /// Value of a section at a point with barycentric coordinates `bary` in
    /// triangle t, expressed in that triangle's frame.
    double evaluate(const TwistedMesh& m, const Eigen::VectorXd& u, int t, const Vec3& bary) const;
    /// Per-vertex values in vertex frames, zero at branch vertices.
    Eigen::VectorXd vertex_values(const Eigen::VectorXd& u) const;

    double m_inner(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const { return a.dot(M * b); }
};

DiscreteOperatorPair assemble(const TwistedMesh& m, const AssemblyOptions& opts = {});

struct SolverOptions {
    double tol = 1e-10;
    int max_iterations = 400;  // block Krylov steps, restarts included
    std::uint64_t seed = 0;
};

/// Eigenpairs of the pencil (K, M) inside (center - half_width, center + half_width).
struct SpectralWindow {
    double center = 0.0;
    double half_width = 0.0;
    std::vector<double> values;  // ascending
    Eigen::MatrixXd vectors;     // columns M-orthonormal
    std::vector<double> residuals;
    int certified_count = 0;  // eigenvalues in the window by inertia
    bool truncated = false;   // more than k_max eigenvalues were present
    int iterations = 0;

    int multiplicity() const { return static_cast<int>(values.size()); }
};

/// Sylvester inertia: number of eigenvalues of (K, M) strictly below `shift`.
int count_below(const DiscreteOperatorPair& ops, double shift);

SpectralWindow solve_window(const DiscreteOperatorPair& ops, double center, double half_width, int k_max = 16,
                            const SolverOptions& opts = {});
SpectralWindow solve_lowest(const DiscreteOperatorPair& ops, int k, const SolverOptions& opts = {});

/// Flips each eigenvector so its largest-magnitude entry is positive.
void normalize_signs(Eigen::MatrixXd& vectors);

}  // namespace z2s
