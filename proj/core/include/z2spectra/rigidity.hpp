#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "z2spectra/expansion.hpp"
#include "z2spectra/geometry.hpp"
#include "z2spectra/laplace.hpp"
#include "z2spectra/mesh.hpp"
#include "z2spectra/perturbation.hpp"

namespace z2s {

/// Spectral window and discretization shared by every solve around one configuration.
struct WindowPolicy {
    double center = 5.165;
    double half_width = 0.2;
    int k_max = 16;
    SolverOptions solver;
    MeshParams mesh;
    int refinement = 0;
    ExpansionOptions expansion;
};

/// Solved state at one configuration on a freshly built mesh.
struct SolvedConfiguration {
    Configuration p;
    TwistedMesh mesh;
    DiscreteOperatorPair ops;
    SpectralWindow window;
    Eigen::MatrixXd trace_matrix;
    double s_min = 0.0;
    Eigen::VectorXd critical;  // window section for s_min, M-normalized
};

SolvedConfiguration solve_configuration(const Configuration& p, const WindowPolicy& policy);

/// Completes a solve from a prebuilt mesh and window (e.g. loaded from a cache).
SolvedConfiguration complete_configuration(const Configuration& p, TwistedMesh mesh, DiscreteOperatorPair ops,
                                           SpectralWindow window, const WindowPolicy& policy);

/// Kernel vector of the 3×N pairing matrix with rows (L_j f0)ᵀ M0, as window
/// coefficients. For N > 4 the kernel direction closest to `reference` is
/// taken. Throws FunctionalRankDeficient if the rows have rank < 3.
Eigen::VectorXd distinguished_coefficients(const Eigen::MatrixXd& pairing, const Eigen::VectorXd& reference,
                                           double rank_tol = 1e-6);

/// Θ around a reference solution: sections at nearby configurations are
/// solved on the reference mesh carried along by the equivariant deformation,
/// the distinguished section is the common kernel of the rotational pairings,
/// and its trace is sampled on annuli moved rigidly with the points.
/// Coefficients are reported in the conventional chart frames.
class ThetaMap {
public:
    ThetaMap(const SolvedConfiguration& reference, const Eigen::VectorXd& f0, const WindowPolicy& policy);

    struct Sample {
        Configuration p;
        SpectralWindow window;
        Eigen::VectorXd section;  // f_p, M_p-normalized, sign aligned with f0
        Eigen::VectorXcd a;       // Θ(p)
        Eigen::VectorXcd b;
        double pairing_smin = 0.0;
    };

    Sample evaluate(const Configuration& p) const;
    Eigen::VectorXd realified(const Configuration& p) const { return realify(evaluate(p).a); }

    /// Realified trace matrix at p of the window basis rotated onto the
    /// reference window (polar factor of the overlap), in conventional frames.
    /// Smooth in p even where the window eigenvalues are degenerate.
    Eigen::MatrixXd aligned_trace_matrix(const Configuration& p) const;

    const Configuration& base() const { return p0_; }
    const Eigen::VectorXd& f0() const { return f0_; }
    const std::array<WindowDerivative, 3>& rotational() const { return lf0_; }
    const TraceOperator& reference_trace() const { return trace0_; }
    const SolvedConfiguration& reference() const { return *ref_; }

private:
    struct Moved {
        TwistedMesh mesh;
        DiscreteOperatorPair ops;
        SpectralWindow window;
        std::vector<double> frame_angles;
    };
    Moved move_to(const Configuration& p) const;
    TraceOperator moved_trace(const Moved& m, const Configuration& p) const;

    std::shared_ptr<const SolvedConfiguration> ref_;
    Configuration p0_;
    Eigen::VectorXd f0_;
    WindowPolicy policy_;
    std::array<WindowDerivative, 3> lf0_;
    Eigen::MatrixXd pairing_rows_;  // 3 × dofs
    TraceOperator trace0_;
    std::vector<Vec3> e1_;          // reference chart frames
};

/// Slice coordinates of the gauge-fixed configuration space: the polar angle
/// of p₂ and free chart motions of p₃ … p_{2n}, as a tangent at p.
ConfigTangent slice_tangent(const Configuration& p, const Eigen::VectorXd& x);
int slice_dimension(const Configuration& p);

struct SearchParams {
    Configuration initial;
    WindowPolicy policy;
    double trust_radius = 0.05;
    double tol_crit = 1e-3;
    int max_iterations = 25;
    double fd_step = 1e-3;
    int threads = 1;
};

struct SearchResult {
    SolvedConfiguration solution;
    Eigen::VectorXd f0;
    int iterations = 0;
    std::vector<double> history;  // s_min per accepted iterate
    double trust_radius = 0.0;
};

/// Levenberg–Marquardt on the trace of the distinguished section over the
/// gauge slice, with centred finite-difference Jacobians.
SearchResult find_critical(const SearchParams& params);

struct ThetaDerivative {
    std::vector<double> steps;
    std::vector<Eigen::VectorXd> central;     // per step, projected mod H₂
    std::vector<Eigen::VectorXd> richardson;  // successive extrapolation levels
    Eigen::VectorXd value;                    // last level
    std::vector<double> growth;               // ‖Θ(exp(p₀, v, t)) mod H₂‖ per step
    double norm = 0.0;
    double level_disagreement = 0.0;
};

/// Orthogonal projector onto the complement of span(H).
Eigen::MatrixXd complement_projector(const Eigen::MatrixXd& h);

/// Throws StepTooLarge when successive Richardson levels differ by more than
/// 20% of max(‖last level‖, scale).
ThetaDerivative theta_derivative_fd(const ThetaMap& theta, const ConfigTangent& v, const std::vector<double>& steps,
                                    const Eigen::MatrixXd& h2, double scale = 0.0);

/// Smallest singular value of Γ from the complement of H₁ to the complement of H₂.
double quotient_smin(const Eigen::VectorXcd& b, const Eigen::MatrixXd& h1, const Eigen::MatrixXd& h2);

enum class Verdict { Rigid, NotMinimal, Degenerate, Inconclusive };
std::string to_string(Verdict v);

struct VerdictInputs {
    int multiplicity = 0;
    double s_min = 0.0;
    double tol_crit = 0.0;
    double min_b = 0.0;
    double tol_b = 0.0;
    double s_q = 0.0;
    double tol_t = 0.0;
    bool growth_consistent = false;
};

Verdict classify(const VerdictInputs& in);

struct Probe {
    Eigen::VectorXd v;          // realified unit tangent
    Eigen::VectorXd predicted;  // (3/2) b·v mod H₂
    ThetaDerivative observed;
    double relative_error = 0.0;
    bool growth_ok = false;     // ‖Θ mod H₂‖ ≥ s_Q t/2 at every step
};

struct RigidityOptions {
    std::vector<double> steps{1e-2, 5e-3, 2.5e-3};
    int probes = 20;
    std::uint64_t seed = 0;
    double tol_crit = 1e-3;
    double tol_b_rel = 1e-2;
    double tol_t_rel = 1e-2;
    double slope_tol = 0.1;
    int threads = 1;
};

struct RigidityReport {
    Configuration p;
    double lambda0 = 0.0;
    std::vector<double> window_values;
    int multiplicity = 0;
    double s_min = 0.0;
    double tol_crit = 0.0;
    std::vector<double> trace_singular_values;
    int trace_rank = 0;
    Eigen::VectorXcd a;
    Eigen::VectorXcd b;
    double min_b = 0.0;
    double tol_b = 0.0;
    std::vector<double> closure;  // rotational closure per generator
    std::vector<double> angles;   // Γ(H₁) vs H₂
    double h2_smin = 0.0;
    double s_q = 0.0;
    double tol_t = 0.0;
    std::vector<Probe> probes;     // transverse to H₁
    std::vector<Probe> h1_probes;  // along the generators
    double generic_scale = 0.0;
    double max_probe_error = 0.0;
    double max_h1_ratio = 0.0;
    Verdict verdict = Verdict::Inconclusive;
    std::vector<std::string> notes;
};

RigidityReport verify_rigidity(const SolvedConfiguration& solved, const Eigen::VectorXd& f0,
                               const WindowPolicy& policy, const RigidityOptions& opts = {});

/// Max point distance between gauge-fixed forms.
double orbit_distance(const Configuration& a, const Configuration& b);

/// Unit realified tangents orthogonal to span(H₁), drawn from the seed.
std::vector<Eigen::VectorXd> transverse_directions(const Configuration& p, int count, std::uint64_t seed);

}  // namespace z2s
