#include <benchmark/benchmark.h>

#include "z2spectra/perturbation.hpp"

using namespace z2s;

namespace {

MeshParams params(double h) {
    MeshParams mp;
    mp.h_target = h;
    return mp;
}

double h_of(const benchmark::State& state) { return 1e-3 * static_cast<double>(state.range(0)); }

void BM_BuildMesh(benchmark::State& state) {
    const Configuration p = regular_tetrahedron();
    for (auto _ : state) {
        TwistedMesh m = build_mesh(p, params(h_of(state)));
        benchmark::DoNotOptimize(m.vertices.data());
    }
}
BENCHMARK(BM_BuildMesh)->Arg(100)->Arg(50)->Unit(benchmark::kMillisecond);

void BM_Assemble(benchmark::State& state) {
    const TwistedMesh m = build_mesh(regular_tetrahedron(), params(h_of(state)));
    for (auto _ : state) {
        DiscreteOperatorPair ops = assemble(m);
        benchmark::DoNotOptimize(ops.K.nonZeros());
    }
    state.counters["dofs"] = static_cast<double>(assemble(m).size());
}
BENCHMARK(BM_Assemble)->Arg(100)->Arg(50)->Unit(benchmark::kMillisecond);

void BM_SolveWindow(benchmark::State& state) {
    const DiscreteOperatorPair ops = assemble(build_mesh(regular_tetrahedron(), params(h_of(state))));
    for (auto _ : state) {
        SpectralWindow w = solve_window(ops, 5.165, 0.2);
        benchmark::DoNotOptimize(w.values.data());
    }
}
BENCHMARK(BM_SolveWindow)->Arg(100)->Arg(50)->Unit(benchmark::kMillisecond);

void BM_SolveLowestUntwisted(benchmark::State& state) {
    const DiscreteOperatorPair ops = assemble(build_mesh(Configuration::calibration({}), params(h_of(state))));
    for (auto _ : state) {
        SpectralWindow w = solve_lowest(ops, 10);
        benchmark::DoNotOptimize(w.values.data());
    }
}
BENCHMARK(BM_SolveLowestUntwisted)->Arg(100)->Arg(50)->Unit(benchmark::kMillisecond);

void BM_TraceMatrix(benchmark::State& state) {
    const Configuration p = regular_tetrahedron();
    const TwistedMesh m = build_mesh(p, params(h_of(state)));
    const DiscreteOperatorPair ops = assemble(m);
    const SpectralWindow w = solve_window(ops, 5.165, 0.2);
    for (auto _ : state) {
        const TraceOperator tr(m, ops, p);
        Eigen::MatrixXd t = tr.trace_matrix(w.vectors);
        benchmark::DoNotOptimize(t.data());
    }
}
BENCHMARK(BM_TraceMatrix)->Arg(100)->Arg(50)->Unit(benchmark::kMillisecond);

void BM_PerturbedWindow(benchmark::State& state) {
    // One side of a finite-difference slope: transport the mesh and re-solve.
    const Configuration p = regular_tetrahedron();
    const TwistedMesh m = build_mesh(p, params(h_of(state)));
    Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(8, -1.0, 1.0).normalized();
    const Configuration q = exp_step(p, ConfigTangent::from_real(x), 5e-3);
    for (auto _ : state) {
        SpectralWindow w = solve_window(assemble(transported_mesh(m, p, q)), 5.165, 0.2);
        benchmark::DoNotOptimize(w.values.data());
    }
}
BENCHMARK(BM_PerturbedWindow)->Arg(100)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
