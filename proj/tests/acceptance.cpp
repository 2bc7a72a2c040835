// End-to-end acceptance run: one PASS/FAIL line per criterion, nonzero exit
// if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "z2cli/commands.hpp"
#include "z2spectra/errors.hpp"
#include "z2spectra/parallel.hpp"
#include "z2spectra/random.hpp"
#include "z2spectra/rigidity.hpp"

using namespace z2s;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double x) {
    char buf[96];
    std::snprintf(buf, sizeof buf, f, x);
    return buf;
}

MeshParams mesh_h(double h) {
    MeshParams mp;
    mp.h_target = h;
    return mp;
}

WindowPolicy tetra_policy(int refinement = 0) {
    WindowPolicy w;
    w.mesh = mesh_h(0.05);
    w.refinement = refinement;
    return w;
}

Configuration random_four(std::uint64_t seed) {
    CounterRng rng(seed);
    std::vector<Vec3> pts;
    for (int i = 0; i < 4; ++i) pts.push_back(Vec3(rng.normal(), rng.normal(), rng.normal()).normalized());
    return Configuration::make(pts);
}

Eigen::VectorXd random_unit(CounterRng& rng, Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.normal();
    return v.normalized();
}

// Shared state between criteria 5 to 8.
struct Tetra {
    SearchResult search;
    RigidityReport report;
    double search_seconds = 0.0;
    double verify_seconds = 0.0;
    bool ok = false;
    std::string failure;
};

Outcome criterion1() {
    const auto t0 = Clock::now();
    const DiscreteOperatorPair ops = assemble(build_mesh(Configuration::calibration({}), mesh_h(0.05)));
    const SpectralWindow w = solve_lowest(ops, 10);
    bool pass = true;
    double worst = 0.0;
    int k = 0;
    for (int l = 0; l <= 2; ++l) {
        const auto [lambda, mult] = oracle::sphere_level(l);
        for (int i = 0; i < mult; ++i, ++k) {
            const double v = w.values[static_cast<std::size_t>(k)];
            const double err = lambda == 0.0 ? std::abs(v) : std::abs(v - lambda) / lambda;
            worst = std::max(worst, err);
            pass = pass && err <= 0.01;
        }
    }
    // The next level (l = 3, λ = 12) must be clearly separated, so multiplicities are exact.
    const bool separated = w.values[9] > 6.0 * 1.5;
    const double secs = seconds_since(t0);
    pass = pass && separated && secs < 120.0;
    return {pass, "max rel error " + fmt("%.2e", worst) + ", 10th eigenvalue " + fmt("%.4f", w.values[9]) +
                      ", " + fmt("%.1f", secs) + " s"};
}

Outcome criterion2() {
    const double exact = oracle::antipodal_lowest();
    const DiscreteOperatorPair ops = assemble(build_mesh(antipodal_pair(), mesh_h(0.05)));
    const SpectralWindow w = solve_window(ops, exact, 0.2);
    double worst = 0.0;
    for (double v : w.values) worst = std::max(worst, std::abs(v - exact) / exact);
    const bool level_ok = w.multiplicity() == 2 && worst <= 0.01;

    // Convergence study: graded base mesh plus three uniform refinements.
    MeshParams cm = mesh_h(0.1);
    cm.grading_exponent = 3.0;
    const TwistedMesh base = build_mesh(antipodal_pair(), cm);
    std::vector<double> err;
    for (int level = 0; level <= 3; ++level) {
        err.push_back(std::abs(solve_lowest(assemble(refine(base, level)), 1).values[0] - exact));
    }
    const double order = std::log2(err.front() / err.back()) / 3.0;
    std::string steps;
    for (int i = 1; i <= 3; ++i) steps += (i > 1 ? "/" : "") + fmt("%.2f", std::log2(err[i - 1] / err[i]));
    return {level_ok && order >= 1.5, "oracle " + fmt("%.10f", exact) + ", multiplicity " +
                                          std::to_string(w.multiplicity()) + ", rel error " + fmt("%.2e", worst) +
                                          ", order " + fmt("%.3f", order) + " (steps " + steps + ")"};
}

Outcome criterion3() {
    const Configuration p = random_four(41);
    const TwistedMesh m = build_mesh(p, mesh_h(0.05));
    const auto pairings = admissible_pairings(p);
    if (pairings.size() < 2) return {false, "fewer than two admissible cut systems"};
    const TwistedMesh m2 = with_cuts(m, cuts_from_pairing(p, pairings[1]));
    const SpectralWindow a = solve_lowest(assemble(m), 6);
    const SpectralWindow b = solve_lowest(assemble(m2), 6);
    double worst = 0.0;
    for (std::size_t k = 0; k < 6; ++k) worst = std::max(worst, std::abs(a.values[k] - b.values[k]) / a.values[k]);
    return {worst <= 1e-10, "max rel difference " + fmt("%.2e", worst) + " over 6 eigenvalues"};
}

Outcome criterion4(int threads) {
    const ConstantCalibration cal = calibrate_constant(mesh_h(0.05));

    // Simple case: lowest eigenvalue of a generic four-point configuration.
    const Configuration ps = random_four(7);
    const TwistedMesh ms = build_mesh(ps, mesh_h(0.05));
    const DiscreteOperatorPair opss = assemble(ms);
    const SpectralWindow ws = solve_lowest(opss, 2);
    const bool simple = ws.values[1] - ws.values[0] > 0.05;
    const Eigen::VectorXcd ts = TraceOperator(ms, opss, ps).trace(ws.vectors.col(0));
    // Gradient scale of the predicted slope, for a floor on near-zero slopes.
    double grad = 0.0;
    for (Eigen::Index j = 0; j < ts.size(); ++j) grad += std::norm(ts[j] * ts[j]);
    grad = cal.scale * 0.5 * std::numbers::pi * std::sqrt(grad);

    CounterRng rng(2024, 4);
    const int nd = 10;
    std::vector<Eigen::VectorXd> dirs;
    for (int k = 0; k < nd; ++k) dirs.push_back(random_unit(rng, 8));
    std::vector<double> simple_err(nd);
    const double ts_step = 1e-3;
    parallel_for(nd, threads, [&](std::size_t k) {
        const ConfigTangent v = ConfigTangent::from_real(dirs[k]);
        const double pred = simple_derivative(ts, v, cal.scale);
        double lam[2];
        for (int s = 0; s < 2; ++s) {
            const Configuration q = exp_step(ps, v, s == 0 ? ts_step : -ts_step);
            lam[s] = solve_lowest(assemble(transported_mesh(ms, ps, q)), 1).values[0];
        }
        const double obs = (lam[0] - lam[1]) / (2.0 * ts_step);
        simple_err[k] = std::abs(obs - pred) / std::max(std::abs(pred), 0.1 * grad);
    });
    const double simple_worst = *std::max_element(simple_err.begin(), simple_err.end());

    // Split case: the fourfold tetrahedral window.
    const Configuration pt = regular_tetrahedron();
    const TwistedMesh mt = build_mesh(pt, mesh_h(0.05));
    const DiscreteOperatorPair opst = assemble(mt);
    const SpectralWindow wt = solve_window(opst, 5.165, 0.2);
    const TraceOperator trt(mt, opst, pt);
    std::vector<Eigen::VectorXcd> traces;
    for (int k = 0; k < wt.multiplicity(); ++k) traces.push_back(trt.trace(wt.vectors.col(k)));
    const double tt = 5e-3;
    std::vector<double> split_err(nd);
    std::vector<Eigen::VectorXd> dirs2;
    for (int k = 0; k < nd; ++k) dirs2.push_back(random_unit(rng, 8));
    parallel_for(nd, threads, [&](std::size_t k) {
        const ConfigTangent v = ConfigTangent::from_real(dirs2[k]);
        const auto pred = predicted_paired_slopes(wt.values, bilinear_form(traces, v, cal.scale).B, tt);
        std::vector<double> side[2];
        for (int s = 0; s < 2; ++s) {
            const Configuration q = exp_step(pt, v, s == 0 ? tt : -tt);
            side[s] = solve_window(assemble(transported_mesh(mt, pt, q)), 5.165, 0.2).values;
        }
        const auto obs = paired_slopes(side[0], side[1], tt);
        double peak = 0.0;
        for (double x : pred) peak = std::max(peak, std::abs(x));
        double e = 0.0;
        for (std::size_t i = 0; i < pred.size(); ++i) {
            e = std::max(e, std::abs(obs[i] - pred[i]) / std::max(std::abs(pred[i]), 0.1 * peak));
        }
        split_err[k] = e;
    });
    const double split_worst = *std::max_element(split_err.begin(), split_err.end());
    const bool pass = simple && wt.multiplicity() == 4 && simple_worst <= 0.05 && split_worst <= 0.10;
    return {pass, "scale " + fmt("%.4f", cal.scale) + ", simple max err " + fmt("%.4f", simple_worst) +
                      " (10 dirs), split max err " + fmt("%.4f", split_worst) + " (10 dirs)"};
}

Outcome criterion5(Tetra& t, int threads) {
    const auto t0 = Clock::now();
    SearchParams sp;
    sp.initial = regular_tetrahedron();
    sp.policy = tetra_policy();
    sp.threads = threads;
    try {
        t.search = find_critical(sp);
    } catch (const Error& e) {
        t.failure = e.what();
        return {false, std::string("search failed: ") + e.what()};
    }
    t.search_seconds = seconds_since(t0);
    const auto& s = t.search.solution;
    const TraceOperator tr(s.mesh, s.ops, s.p);
    const Eigen::VectorXcd b = tr.b_vector(t.search.f0);
    const double tol_b = 1e-2 * b.cwiseAbs().maxCoeff();
    const double min_b = b.cwiseAbs().minCoeff();
    const bool pass = s.s_min < 1e-3 && s.window.multiplicity() == 4 && min_b > tol_b && t.search_seconds < 1800;
    t.ok = pass;
    return {pass, "s_min " + fmt("%.2e", s.s_min) + ", multiplicity " + std::to_string(s.window.multiplicity()) +
                      ", min|b| " + fmt("%.4f", min_b) + " > tol_b " + fmt("%.4f", tol_b) + ", " +
                      fmt("%.1f", t.search_seconds) + " s"};
}

Outcome criterion6(Tetra& t, int threads) {
    if (!t.ok) return {false, "no critical configuration from criterion 5"};
    const auto t0 = Clock::now();
    RigidityOptions o;
    o.probes = 20;
    o.seed = 11;
    o.threads = threads;
    WindowPolicy policy = tetra_policy();
    policy.center = t.search.solution.window.center;
    t.report = verify_rigidity(t.search.solution, t.search.f0, policy, o);
    t.verify_seconds = seconds_since(t0);
    const auto& r = t.report;
    const bool pass = r.probes.size() >= 20 && r.max_probe_error <= 0.10 && r.max_h1_ratio <= 0.10;
    return {pass, std::to_string(r.probes.size()) + " probes, max rel error " + fmt("%.4f", r.max_probe_error) +
                      ", H1 ratio " + fmt("%.2e", r.max_h1_ratio) + ", verdict " + to_string(r.verdict) + ", " +
                      fmt("%.1f", t.verify_seconds) + " s"};
}

Outcome criterion7(Tetra& t, int threads) {
    if (!t.ok || t.report.probes.empty()) return {false, "no rigidity report"};
    const auto& r = t.report;
    bool growth = r.s_q > 0.0;
    double min_ratio = 1e300;  // min over probes and steps of growth / (s_Q t / 2)
    const RigidityOptions defaults;
    for (const auto& p : r.probes) {
        growth = growth && p.growth_ok;
        for (std::size_t s = 0; s < p.observed.growth.size(); ++s) {
            min_ratio = std::min(min_ratio, p.observed.growth[s] / (0.5 * r.s_q * defaults.steps[s]));
        }
    }

    // Restarts from random 0.05 rad perturbations.
    const Configuration p0 = regular_tetrahedron();
    CounterRng rng(77, 7);
    std::vector<Configuration> starts;
    for (int k = 0; k < 10; ++k) {
        std::vector<Vec3> amb;
        double longest = 0.0;
        for (std::size_t j = 0; j < p0.size(); ++j) {
            Vec3 x(rng.normal(), rng.normal(), rng.normal());
            x -= x.dot(p0[j]) * p0[j];
            amb.push_back(x);
            longest = std::max(longest, x.norm());
        }
        for (auto& x : amb) x *= 0.05 / longest;
        starts.push_back(exp_step(p0, tangent_from_ambient(p0, amb), 1.0));
    }
    std::vector<double> dist(10, 1e300);
    std::vector<std::string> errors(10);
    parallel_for(10, threads, [&](std::size_t k) {
        SearchParams sp;
        sp.initial = starts[k];
        sp.policy = tetra_policy();
        try {
            dist[k] = orbit_distance(find_critical(sp).solution.p, p0);
        } catch (const Error& e) {
            errors[k] = e.what();
        }
    });
    const double worst = *std::max_element(dist.begin(), dist.end());
    double start_min = 1e300;
    for (const auto& s : starts) start_min = std::min(start_min, orbit_distance(s, p0));
    const bool pass = growth && worst <= 1e-2;
    std::string detail = "s_Q " + fmt("%.4f", r.s_q) + ", min growth/(s_Q t/2) " + fmt("%.3f", min_ratio) +
                         ", restarts max orbit distance " + fmt("%.2e", worst) + " (starts >= " +
                         fmt("%.3f", start_min) + ")";
    for (const auto& e : errors) {
        if (!e.empty()) detail += "; restart failed: " + e;
    }
    return {pass, detail};
}

Outcome criterion8(Tetra& t, int threads) {
    if (!t.ok || t.report.probes.empty()) return {false, "no probe directions"};
    // Stationarity is measured on one refinement of the search mesh.
    const auto& s = t.search.solution;
    const TwistedMesh fine = refine(s.mesh);
    const DiscreteOperatorPair ops = assemble(fine);
    const SpectralWindow w = solve_window(ops, s.window.center, s.window.half_width);
    if (w.multiplicity() != 4) return {false, "refined window multiplicity " + std::to_string(w.multiplicity())};
    const TraceOperator tr(fine, ops, s.p);
    const Eigen::MatrixXd tm = tr.trace_matrix(w.vectors);
    const Eigen::VectorXd f0 = w.vectors * critical_direction(tm);
    const std::vector<double> steps{-0.04, -0.02, -0.01, 0.01, 0.02, 0.04};
    const auto& probes = t.report.probes;
    std::vector<StationarityFit> fits(probes.size());
    std::vector<std::string> errors(probes.size());
    parallel_for(probes.size(), threads, [&](std::size_t k) {
        try {
            const BranchProfile b =
                critical_branch(fine, s.p, w, f0, ConfigTangent::from_real(probes[k].v), steps);
            fits[k] = stationarity_fit(b.steps, b.shifts);
        } catch (const Error& e) {
            errors[k] = e.what();
        }
    });
    double min_r2 = 1.0, max_c = 0.0, max_lin = 0.0;
    bool ok = true;
    for (std::size_t k = 0; k < fits.size(); ++k) {
        if (!errors[k].empty()) {
            ok = false;
            continue;
        }
        min_r2 = std::min(min_r2, fits[k].r2);
        max_c = std::max(max_c, fits[k].bound_constant);
        max_lin = std::max(max_lin, std::abs(fits[k].linear_slope));
    }
    const bool pass = ok && min_r2 >= 0.99;
    std::string detail = std::to_string(probes.size()) + " directions, min R2 " + fmt("%.5f", min_r2) + ", C " +
                         fmt("%.3f", max_c) + ", max linear slope " + fmt("%.2e", max_lin) + ", s_min(fine) " +
                         fmt("%.2e", criticality_gap(tm));
    for (const auto& e : errors) {
        if (!e.empty()) detail += "; " + e;
    }
    return {pass, detail};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome criterion9() {
    const std::string text =
        "[configuration]\npreset = tetrahedron\n[mesh]\nh_target = 0.1\n[verify]\nprobes = 3\n"
        "[perturb]\ndirections = 3\n[run]\nseed = 9\n";
    const fs::path root = fs::temp_directory_path() / "z2s_acceptance_determinism";
    fs::remove_all(root);
    std::vector<std::string> compared;
    bool same = true;
    for (const std::string cmd : {"trace", "perturb", "search", "verify"}) {
        std::vector<fs::path> dirs;
        for (int run = 0; run < 2; ++run) {
            z2cli::RunConfig cfg = z2cli::parse_config(text, "<acceptance>");
            cfg.out_dir = root / (cmd + std::to_string(run));
            cfg.cache = false;
            std::ostringstream sink;
            z2cli::run_command(cmd, cfg, sink);
            dirs.push_back(cfg.out_dir);
        }
        for (const auto& e : fs::directory_iterator(dirs[0])) {
            if (!e.is_regular_file()) continue;
            const fs::path other = dirs[1] / e.path().filename();
            same = same && fs::exists(other) && slurp(e.path()) == slurp(other);
            compared.push_back(cmd + "/" + e.path().filename().string());
        }
    }
    fs::remove_all(root);
    return {same && !compared.empty(), std::to_string(compared.size()) + " files byte-identical across two runs"};
}

}  // namespace

int main() {
    const int threads = 1;
    Tetra tetra;
    struct Item {
        int id;
        std::string name;
        std::function<Outcome()> run;
    };
    const std::vector<Item> items{
        {1, "untwisted sphere levels", [] { return criterion1(); }},
        {2, "antipodal model and convergence", [] { return criterion2(); }},
        {3, "cut-gauge invariance", [] { return criterion3(); }},
        {4, "perturbation slopes", [&] { return criterion4(threads); }},
        {5, "tetrahedral criticality", [&] { return criterion5(tetra, threads); }},
        {6, "trace-derivative law", [&] { return criterion6(tetra, threads); }},
        {7, "rigidity growth and restarts", [&] { return criterion7(tetra, threads); }},
        {8, "stationarity of the critical branch", [&] { return criterion8(tetra, threads); }},
        {9, "determinism", [] { return criterion9(); }},
    };
    int failed = 0;
    for (const auto& item : items) {
        Outcome o;
        const auto t0 = Clock::now();
        try {
            o = item.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::printf("criterion %d %s: %s (%s) [%.1f s]\n", item.id, o.pass ? "PASS" : "FAIL", item.name.c_str(),
                    o.detail.c_str(), seconds_since(t0));
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(items.size()) - failed, items.size());
    return failed == 0 ? 0 : 1;
}
