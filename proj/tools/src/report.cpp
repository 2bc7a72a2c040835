#include "z2cli/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "z2spectra/errors.hpp"

namespace z2cli {

namespace fs = std::filesystem;

std::string format17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

json to_json(const z2s::Configuration& p) {
    json a = json::array();
    for (const auto& x : p.points()) a.push_back({x.x(), x.y(), x.z()});
    return a;
}

json to_json(const Eigen::VectorXcd& v) {
    json a = json::array();
    for (Eigen::Index j = 0; j < v.size(); ++j) a.push_back({v[j].real(), v[j].imag()});
    return a;
}

json to_json(const std::vector<double>& v) { return json(v); }

namespace {

json probe_json(const z2s::Probe& p) {
    json j;
    j["direction"] = std::vector<double>(p.v.data(), p.v.data() + p.v.size());
    j["predicted_norm"] = p.predicted.norm();
    j["observed_norm"] = p.observed.norm;
    j["relative_error"] = p.relative_error;
    j["growth_ok"] = p.growth_ok;
    j["steps"] = p.observed.steps;
    j["growth"] = p.observed.growth;
    j["level_disagreement"] = p.observed.level_disagreement;
    return j;
}

}  // namespace

json to_json(const z2s::RigidityReport& r) {
    json j;
    j["configuration"] = to_json(r.p);
    j["lambda0"] = r.lambda0;
    j["window_values"] = r.window_values;
    j["multiplicity"] = r.multiplicity;
    j["s_min"] = r.s_min;
    j["tol_crit"] = r.tol_crit;
    j["trace_singular_values"] = r.trace_singular_values;
    j["trace_rank"] = r.trace_rank;
    j["a"] = to_json(r.a);
    j["b"] = to_json(r.b);
    j["min_abs_b"] = r.min_b;
    j["tol_b"] = r.tol_b;
    j["rotational_closure"] = r.closure;
    j["principal_angles"] = r.angles;
    j["h2_smin"] = r.h2_smin;
    j["s_q"] = r.s_q;
    j["tol_t"] = r.tol_t;
    json probes = json::array(), h1 = json::array();
    for (const auto& p : r.probes) probes.push_back(probe_json(p));
    for (const auto& p : r.h1_probes) h1.push_back(probe_json(p));
    j["probes"] = probes;
    j["h1_probes"] = h1;
    j["generic_scale"] = r.generic_scale;
    j["max_probe_error"] = r.max_probe_error;
    j["max_h1_ratio"] = r.max_h1_ratio;
    j["verdict"] = z2s::to_string(r.verdict);
    j["notes"] = r.notes;
    return j;
}

void write_text(const fs::path& path, const std::string& text) {
    std::error_code ec;
    if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) throw z2s::Error(z2s::ErrorCode::IoError, "cannot write " + path.string());
}

void write_json(const fs::path& path, const json& doc) { write_text(path, doc.dump(2) + "\n"); }

void CsvTable::add(std::vector<double> values) {
    std::vector<std::string> row;
    for (double v : values) row.push_back(format17(v));
    rows.push_back(std::move(row));
}

void write_csv(const fs::path& path, const CsvTable& table) {
    std::ostringstream s;
    for (std::size_t k = 0; k < table.header.size(); ++k) s << (k ? "," : "") << table.header[k];
    s << '\n';
    for (const auto& row : table.rows) {
        for (std::size_t k = 0; k < row.size(); ++k) s << (k ? "," : "") << row[k];
        s << '\n';
    }
    write_text(path, s.str());
}

std::string trace_table(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b, const std::vector<double>& residual) {
    std::ostringstream s;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%5s %25s %25s %25s %25s %25s\n", "point", "re_a", "im_a", "re_b", "im_b",
                  "residual");
    s << buf;
    for (Eigen::Index j = 0; j < a.size(); ++j) {
        std::snprintf(buf, sizeof buf, "%5lld %25.17g %25.17g %25.17g %25.17g %25.17g\n", static_cast<long long>(j),
                      a[j].real(), a[j].imag(), b[j].real(), b[j].imag(),
                      residual[static_cast<std::size_t>(j)]);
        s << buf;
    }
    return s.str();
}

void emit_plotdata(const z2s::RigidityReport& r, const fs::path& dir) {
    CsvTable growth{{"probe", "step", "growth", "slope"}, {}};
    for (std::size_t k = 0; k < r.probes.size(); ++k) {
        const auto& o = r.probes[k].observed;
        for (std::size_t s = 0; s < o.steps.size() && s < o.growth.size(); ++s) {
            growth.add({static_cast<double>(k), o.steps[s], o.growth[s], o.growth[s] / o.steps[s]});
        }
    }
    write_csv(dir / "growth.csv", growth);
    CsvTable angles{{"index", "angle"}, {}};
    for (std::size_t k = 0; k < r.angles.size(); ++k) angles.add({static_cast<double>(k), r.angles[k]});
    write_csv(dir / "angles.csv", angles);
}

}  // namespace z2cli
