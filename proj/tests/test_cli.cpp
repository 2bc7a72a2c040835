#include <gtest/gtest.h>

#include <cstring>
#include <fstream>
#include <sstream>

#include "z2cli/commands.hpp"
#include "z2cli/store.hpp"
#include "z2spectra/errors.hpp"

using namespace z2cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("z2s_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

int count_lines(const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    int n = 0;
    while (std::getline(in, line)) ++n;
    return n;
}

}  // namespace

TEST(Config, ParsesSectionsAndDefaults) {
    const RunConfig cfg = parse_config(
        "[configuration]\npreset = tetrahedron\n[mesh]\nh_target = 0.08\nannuli_radii = 0.05, 0.07 0.1\n"
        "[window]\ncenter = 5.1\n[verify]\nsteps = 0.02 0.01\n[run]\nseed = 42\nthreads = 3\n",
        "<test>");
    EXPECT_EQ(cfg.preset, "tetrahedron");
    EXPECT_DOUBLE_EQ(cfg.policy.mesh.h_target, 0.08);
    EXPECT_EQ(cfg.policy.mesh.annuli_radii, (std::vector<double>{0.05, 0.07, 0.1}));
    EXPECT_DOUBLE_EQ(cfg.policy.center, 5.1);
    EXPECT_DOUBLE_EQ(cfg.policy.half_width, 0.2);
    EXPECT_EQ(cfg.rigidity.steps.size(), 2u);
    EXPECT_EQ(cfg.seed, 42u);
    EXPECT_EQ(cfg.policy.solver.seed, 42u);
    EXPECT_EQ(cfg.rigidity.threads, 3);
    EXPECT_EQ(cfg.configuration().size(), 4u);
}

TEST(Config, ExplicitPoints) {
    const RunConfig cfg = parse_config("[configuration]\npoints = 0 0 1, 0 0 -1, 1 0 0, -1 0.1 0\n", "<test>");
    const auto p = cfg.configuration();
    ASSERT_EQ(p.size(), 4u);
    EXPECT_NEAR(p[3].norm(), 1.0, 1e-15);
}

TEST(Config, ErrorsNameTheLine) {
    auto line_of = [](const std::string& text) {
        try {
            parse_config(text, "<test>");
        } catch (const ConfigError& e) {
            EXPECT_EQ(exit_code_for(e), 2);
            return e.line();
        }
        return -1;
    };
    EXPECT_EQ(line_of("[configuration]\npreset = tetrahedron\n[mesh]\nh_target = fast\n"), 4);
    EXPECT_EQ(line_of("[configuration]\npreset = tetrahedron\n\n[mesh]\nbogus = 1\n"), 5);
    EXPECT_EQ(line_of("[configuration]\npreset = tetrahedron\n[search]\ntol_crit = -1\n"), 4);
    EXPECT_EQ(line_of("[configuration\npreset = tetrahedron\n"), 1);
    EXPECT_EQ(line_of("[configuration]\npoints = 0 0 1, 0 0\n"), 2);
}

TEST(Config, ErrorDocument) {
    try {
        parse_config("[configuration]\npreset = cube\n", "cfg.ini");
        FAIL();
    } catch (const ConfigError& e) {
        const json doc = error_document(e, "cfg.ini");
        EXPECT_EQ(doc["error"]["code"], "InputError");
        EXPECT_EQ(doc["error"]["input"], "cfg.ini");
        EXPECT_EQ(doc["error"]["line"], 2);
    }
}

TEST(Config, EnvironmentOverrides) {
    RunConfig cfg = parse_config("[configuration]\npreset = antipodal\n", "<test>");
    setenv("Z2S_OUT", "/tmp/elsewhere", 1);
    setenv("Z2S_THREADS", "2", 1);
    apply_environment(cfg);
    unsetenv("Z2S_OUT");
    unsetenv("Z2S_THREADS");
    EXPECT_EQ(cfg.out_dir, fs::path("/tmp/elsewhere"));
    EXPECT_EQ(cfg.threads, 2);
    EXPECT_EQ(cfg.search.threads, 2);
}

TEST(Store, RoundTripIsBitExact) {
    const SessionStore store(scratch("store_rt"));
    z2s::SpectralWindow w;
    w.center = 0.75;
    w.half_width = 0.3;
    w.values = {0.7500001, 0.75000019999999997};
    w.vectors = Eigen::MatrixXd::Random(7, 2);
    w.residuals = {1e-12, 3e-13};
    w.certified_count = 2;
    const std::string key = SessionStore::make_key({"a", "b"});
    store.save(key, "window.bin", encode_window(w));
    const auto blob = store.load(key, "window.bin");
    ASSERT_TRUE(blob.has_value());
    const z2s::SpectralWindow r = decode_window(*blob);
    EXPECT_EQ(r.values, w.values);
    EXPECT_EQ(std::memcmp(r.vectors.data(), w.vectors.data(), sizeof(double) * 14), 0);
    EXPECT_EQ(r.certified_count, 2);
}

TEST(Store, MeshRoundTrip) {
    const SessionStore store(scratch("store_mesh"));
    z2s::MeshParams mp;
    mp.h_target = 0.15;
    const z2s::TwistedMesh m = z2s::build_mesh(z2s::regular_tetrahedron(), mp);
    store.save("abcd", "mesh.bin", encode_mesh(m));
    const z2s::TwistedMesh r = decode_mesh(*store.load("abcd", "mesh.bin"));
    EXPECT_EQ(r.triangles, m.triangles);
    EXPECT_EQ(r.sigma, m.sigma);
    EXPECT_EQ(r.vertices, m.vertices);
    EXPECT_EQ(r.cuts.arcs.size(), m.cuts.arcs.size());
    EXPECT_EQ(encode_mesh(r), encode_mesh(m));
}

TEST(Store, UnknownKeyIsNotCached) {
    const SessionStore store(scratch("store_miss"));
    EXPECT_FALSE(store.load(SessionStore::make_key({"nothing"}), "window.bin").has_value());
}

TEST(Store, TamperedFileIsCorrupt) {
    const fs::path root = scratch("store_bad");
    const SessionStore store(root);
    store.save("ffee", "x.bin", std::string(100, 'q'));
    const fs::path file = root / "ff" / "ffee" / "x.bin";
    std::string blob = slurp(file);
    blob[blob.size() - 5] ^= 1;
    std::ofstream(file, std::ios::binary | std::ios::trunc) << blob;
    try {
        store.load("ffee", "x.bin");
        FAIL() << "expected CorruptStore";
    } catch (const z2s::Error& e) {
        EXPECT_EQ(e.code(), z2s::ErrorCode::CorruptStore);
    }
}

TEST(Store, Sha256KnownAnswer) {
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Plotdata, EmptyProbeListGivesHeaderOnly) {
    const fs::path dir = scratch("plot_empty");
    emit_plotdata(z2s::RigidityReport{}, dir);
    EXPECT_EQ(slurp(dir / "growth.csv"), "probe,step,growth,slope\n");
    EXPECT_EQ(slurp(dir / "angles.csv"), "index,angle\n");
}

TEST(Plotdata, SeventeenDigits) {
    const fs::path dir = scratch("plot_digits");
    CsvTable t{{"x"}, {}};
    t.add({0.1});
    write_csv(dir / "t.csv", t);
    EXPECT_EQ(slurp(dir / "t.csv"), "x\n0.10000000000000001\n");
}

TEST(Commands, CalibrateRowsAndNonAsciiDirectory) {
    RunConfig cfg = parse_config(
        "[configuration]\npreset = untwisted\n[calibrate]\nh_target = 0.12\nconvergence_h = 0.3\nrefinements = 2\n",
        "<test>");
    cfg.out_dir = scratch("calib") / "résultats_λ";
    std::ostringstream out;
    const json j = run_command("calibrate", cfg, out);
    EXPECT_EQ(count_lines(cfg.out_dir / "convergence.csv"), 4);  // header + levels 0, 1, 2
    EXPECT_TRUE(fs::exists(cfg.out_dir / "calibrate.json"));
    EXPECT_EQ(j["eigenvalues"].size(), 11u);
}

TEST(Commands, TraceIsDeterministicAndCacheTransparent) {
    const std::string text =
        "[configuration]\npreset = tetrahedron\n[mesh]\nh_target = 0.12\n[run]\nseed = 5\n";
    RunConfig a = parse_config(text, "<test>");
    a.out_dir = scratch("det_a");
    RunConfig b = a;
    b.out_dir = scratch("det_b");
    b.cache = false;
    std::ostringstream sink;
    run_command("trace", a, sink);
    run_command("trace", a, sink);  // second run replays from the store
    run_command("trace", b, sink);
    EXPECT_EQ(slurp(a.out_dir / "trace.json"), slurp(b.out_dir / "trace.json"));
    EXPECT_EQ(slurp(a.out_dir / "trace.txt"), slurp(b.out_dir / "trace.txt"));
    EXPECT_FALSE(fs::exists(b.out_dir / "store"));
}

TEST(Commands, UntwistedTraceIsInputError) {
    RunConfig cfg = parse_config("[configuration]\npreset = untwisted\n", "<test>");
    cfg.out_dir = scratch("untwisted");
    std::ostringstream sink;
    try {
        run_command("trace", cfg, sink);
        FAIL();
    } catch (const z2s::Error& e) {
        EXPECT_EQ(exit_code_for(e), 2);
    }
}
