#pragma once

#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "z2spectra/geometry.hpp"
#include "z2spectra/laplace.hpp"
#include "z2spectra/mesh.hpp"

namespace z2s {

struct ExpansionOptions {
    int samples = 128;           // per circle
    std::vector<double> radii;   // chart units; empty means the mesh's annulus radii
    /// Per-point rotation of the chart frame (radians); coefficients are
    /// reported in the rotated frame.
    std::vector<double> frame_angles;
    /// Per-point anchor for the base angle of the lift. The base ray points
    /// away from the point's cut; its angle is taken modulo 2π nearest to the
    /// anchor, which keeps coefficient signs continuous along a family.
    std::vector<double> reference_base_angles;
    double max_residual = 0.05;
};

/// Samples of a section on concentric chart circles around one branch point,
/// continued onto the double cover. Row k holds radius k; column s holds the
/// covering angle angles[s], which runs over [base, base + 4π).
struct AnnulusLift {
    int branch = -1;
    std::vector<double> radii;
    double base_angle = 0.0;
    std::vector<double> angles;
    Eigen::MatrixXd values;
    /// max |F(θ + 2π) + F(θ)| / max |F| for the continued lift.
    double antiperiodicity_defect = 0.0;
    /// Share of the lift's energy above a quarter of the sampling band; jumps
    /// from a broken sign lift show up here.
    double high_frequency_share = 0.0;
};

/// u ≈ Re(a z^{1/2} + b z^{3/2}) near the branch point, z in the chart.
struct LocalExpansion {
    cplx a;
    cplx b;
    double residual = 0.0;
    std::vector<double> radii;
    std::vector<cplx> a_profile;  // frequency-1 coefficient per radius
    std::vector<cplx> b_profile;  // frequency-3 coefficient per radius
};

/// Fits the two-term radial models to a lift; throws PoorFit above `max_residual`.
LocalExpansion extract_coeffs(const AnnulusLift& lift, double max_residual = 0.05);

/// Linear map from a discrete section to its local expansion data at every
/// branch point. Sampling weights are precomputed, so every query is a sparse
/// product followed by a small least-squares fit.
class TraceOperator {
public:
    TraceOperator(const TwistedMesh& mesh, const DiscreteOperatorPair& ops, const Configuration& p,
                  const ExpansionOptions& opts = {});

    std::size_t points() const { return branches_.size(); }
    const std::vector<double>& radii() const { return radii_; }
    const std::vector<double>& base_angles() const { return base_angles_; }

    AnnulusLift lift(const Eigen::VectorXd& u, int j) const;
    /// Throws PoorFit when the fit residual exceeds the configured bound.
    LocalExpansion expand(const Eigen::VectorXd& u, int j) const;
    /// Expansion without the residual check.
    LocalExpansion expand_unchecked(const Eigen::VectorXd& u, int j) const;
    std::vector<LocalExpansion> expand_all(const Eigen::VectorXd& u) const;

    /// (a_1, ..., a_2n).
    Eigen::VectorXcd trace(const Eigen::VectorXd& u) const;
    /// (b_1, ..., b_2n).
    Eigen::VectorXcd b_vector(const Eigen::VectorXd& u) const;
    /// (Re a_1, Im a_1, Re a_2, ...), no residual check.
    Eigen::VectorXd realified_trace(const Eigen::VectorXd& u) const;

    /// Column k is the realified trace of basis column k; throws PoorFit naming the column.
    Eigen::MatrixXd trace_matrix(const Eigen::MatrixXd& basis) const;

private:
    struct Branch {
        // Rows 2k and 2k+1: frequency-1 and frequency-3 coefficients on circle k.
        Eigen::SparseMatrix<cplx, Eigen::RowMajor> profile;
        // Sample-level operator for diagnostics: row k*S + s.
        Eigen::SparseMatrix<double, Eigen::RowMajor> samples;
        std::vector<double> angles;
    };

    std::vector<Branch> branches_;
    std::vector<double> radii_;
    std::vector<double> base_angles_;
    int samples_ = 0;
    double max_residual_ = 0.05;
};

Eigen::VectorXd realify(const Eigen::VectorXcd& c);
Eigen::VectorXcd complexify(const Eigen::VectorXd& x);

/// Smallest singular value of a realified trace matrix (0 when it has more
/// columns than rows).
double criticality_gap(const Eigen::MatrixXd& trace_matrix);

/// Right singular vector for the smallest singular value.
Eigen::VectorXd critical_direction(const Eigen::MatrixXd& trace_matrix);

}  // namespace z2s
