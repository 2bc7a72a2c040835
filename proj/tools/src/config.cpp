#include "z2cli/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace z2cli {

namespace pt = boost::property_tree;

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// Line numbers of "section.key" entries, for error messages.
std::map<std::string, int> index_lines(const std::string& text) {
    std::map<std::string, int> out;
    std::istringstream in(text);
    std::string line, section;
    int n = 0;
    while (std::getline(in, line)) {
        ++n;
        const std::string t = trim(line);
        if (t.empty() || t[0] == ';' || t[0] == '#') continue;
        if (t.front() == '[' && t.back() == ']') {
            section = trim(t.substr(1, t.size() - 2));
            out.emplace(section, n);
            continue;
        }
        const auto eq = t.find('=');
        if (eq != std::string::npos) out.emplace(section + "." + trim(t.substr(0, eq)), n);
    }
    return out;
}

class Reader {
public:
    Reader(const pt::ptree& tree, std::map<std::string, int> lines, std::string origin)
        : tree_(tree), lines_(std::move(lines)), origin_(std::move(origin)) {}

    [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
        const auto it = lines_.find(key);
        const int line = it == lines_.end() ? 0 : it->second;
        throw ConfigError(origin_ + (line ? ":" + std::to_string(line) : "") + ": " + key + ": " + msg, origin_, line);
    }

    std::optional<std::string> raw(const std::string& key) {
        used_.insert(key);
        const auto v = tree_.get_optional<std::string>(pt::ptree::path_type(key, '.'));
        if (!v) return std::nullopt;
        return trim(*v);
    }

    void number(const std::string& key, double& out) {
        if (auto s = raw(key)) out = parse_double(key, *s);
    }
    void positive(const std::string& key, double& out) {
        number(key, out);
        if (!(out > 0.0)) fail(key, "must be positive");
    }
    void integer(const std::string& key, int& out, int min_value) {
        if (auto s = raw(key)) {
            int v = 0;
            const auto [p, ec] = std::from_chars(s->data(), s->data() + s->size(), v);
            if (ec != std::errc() || p != s->data() + s->size()) fail(key, "expected an integer, got '" + *s + "'");
            if (v < min_value) fail(key, "must be at least " + std::to_string(min_value));
            out = v;
        }
    }
    void unsigned64(const std::string& key, std::uint64_t& out) {
        if (auto s = raw(key)) {
            std::uint64_t v = 0;
            const auto [p, ec] = std::from_chars(s->data(), s->data() + s->size(), v);
            if (ec != std::errc() || p != s->data() + s->size()) fail(key, "expected an unsigned integer");
            out = v;
        }
    }
    void boolean(const std::string& key, bool& out) {
        if (auto s = raw(key)) {
            if (*s == "true" || *s == "1" || *s == "yes") out = true;
            else if (*s == "false" || *s == "0" || *s == "no") out = false;
            else fail(key, "expected true or false");
        }
    }
    void list(const std::string& key, std::vector<double>& out, bool require_positive) {
        if (auto s = raw(key)) {
            out.clear();
            std::string tok;
            std::istringstream in(*s);
            while (in >> tok) {
                if (tok.back() == ',') tok.pop_back();
                if (tok.empty()) continue;
                const double v = parse_double(key, tok);
                if (require_positive && !(v > 0.0)) fail(key, "entries must be positive");
                out.push_back(v);
            }
            if (out.empty()) fail(key, "empty list");
        }
    }

    double parse_double(const std::string& key, const std::string& s) const {
        double v = 0.0;
        const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v)) {
            fail(key, "expected a number, got '" + s + "'");
        }
        return v;
    }

    void reject_unknown() const {
        for (const auto& [section, sub] : tree_) {
            if (sub.empty() && !sub.data().empty()) fail(section, "key outside of any section");
            for (const auto& [k, v] : sub) {
                const std::string key = section + "." + k;
                if (!used_.count(key)) fail(key, "unknown key");
            }
        }
    }

    const std::string& origin() const { return origin_; }
    int line_of(const std::string& key) const {
        const auto it = lines_.find(key);
        return it == lines_.end() ? 0 : it->second;
    }

private:
    const pt::ptree& tree_;
    std::map<std::string, int> lines_;
    std::string origin_;
    std::set<std::string> used_;
};

std::vector<z2s::Vec3> parse_points(Reader& r, const std::string& key, const std::string& text) {
    std::vector<z2s::Vec3> pts;
    std::string s = text;
    for (char& c : s) {
        if (c == ',' || c == ';') c = ' ';
    }
    std::istringstream in(s);
    std::vector<double> xs;
    std::string tok;
    while (in >> tok) xs.push_back(r.parse_double(key, tok));
    if (xs.size() % 3 != 0) r.fail(key, "expected x y z triples");
    for (std::size_t i = 0; i < xs.size(); i += 3) pts.emplace_back(xs[i], xs[i + 1], xs[i + 2]);
    return pts;
}

std::vector<z2s::Vec3> read_points_file(Reader& r, const std::string& key, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) r.fail(key, "cannot open points file " + path.string());
    std::ostringstream text;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        text << line << '\n';
    }
    return parse_points(r, key, text.str());
}

}  // namespace

z2s::Configuration RunConfig::configuration() const {
    if (preset == "tetrahedron") return z2s::regular_tetrahedron();
    if (preset == "antipodal") return z2s::antipodal_pair();
    if (preset == "untwisted") return z2s::Configuration::calibration({});
    return z2s::Configuration::make(points);
}

RunConfig parse_config(const std::string& text, const std::string& origin) {
    pt::ptree tree;
    {
        std::istringstream in(text);
        try {
            pt::ini_parser::read_ini(in, tree);
        } catch (const pt::ini_parser_error& e) {
            throw ConfigError(origin + ":" + std::to_string(e.line()) + ": " + e.message(), origin,
                              static_cast<int>(e.line()));
        }
    }
    Reader r(tree, index_lines(text), origin);
    RunConfig cfg;
    if (origin.find('<') != 0) cfg.source = origin;

    if (auto s = r.raw("configuration.preset")) {
        if (*s != "tetrahedron" && *s != "antipodal" && *s != "untwisted") {
            r.fail("configuration.preset", "expected tetrahedron, antipodal or untwisted");
        }
        cfg.preset = *s;
    }
    if (auto s = r.raw("configuration.points")) cfg.points = parse_points(r, "configuration.points", *s);
    if (auto s = r.raw("configuration.file")) {
        std::filesystem::path f = *s;
        if (f.is_relative() && !cfg.source.empty()) f = cfg.source.parent_path() / f;
        cfg.points = read_points_file(r, "configuration.file", f);
    }
    if (cfg.preset.empty() && cfg.points.empty()) {
        r.fail("configuration", "needs one of preset, points or file");
    }
    if (!cfg.preset.empty() && !cfg.points.empty()) r.fail("configuration", "preset and explicit points are exclusive");

    auto& mesh = cfg.policy.mesh;
    r.positive("mesh.h_target", mesh.h_target);
    r.number("mesh.grading_exponent", mesh.grading_exponent);
    if (mesh.grading_exponent < 1.0) r.fail("mesh.grading_exponent", "must be at least 1");
    r.list("mesh.annuli_radii", mesh.annuli_radii, true);
    r.integer("mesh.rings", mesh.rings, 1);
    r.positive("mesh.grading_radius", mesh.grading_radius);
    r.positive("mesh.max_aspect", mesh.max_aspect);
    r.integer("mesh.refine", cfg.policy.refinement, 0);

    r.number("window.center", cfg.policy.center);
    r.positive("window.half_width", cfg.policy.half_width);
    r.integer("window.k_max", cfg.policy.k_max, 1);

    r.positive("solver.tol", cfg.policy.solver.tol);
    r.integer("solver.max_iterations", cfg.policy.solver.max_iterations, 1);

    r.integer("expansion.samples", cfg.policy.expansion.samples, 1);
    r.list("expansion.radii", cfg.policy.expansion.radii, true);
    r.positive("expansion.max_residual", cfg.policy.expansion.max_residual);

    r.positive("search.trust_radius", cfg.search.trust_radius);
    r.positive("search.tol_crit", cfg.search.tol_crit);
    r.integer("search.max_iterations", cfg.search.max_iterations, 0);
    r.positive("search.fd_step", cfg.search.fd_step);

    r.integer("verify.probes", cfg.rigidity.probes, 0);
    r.list("verify.steps", cfg.rigidity.steps, true);
    r.positive("verify.tol_b_rel", cfg.rigidity.tol_b_rel);
    r.positive("verify.tol_t_rel", cfg.rigidity.tol_t_rel);
    r.positive("verify.slope_tol", cfg.rigidity.slope_tol);
    cfg.rigidity.tol_crit = cfg.search.tol_crit;

    r.integer("perturb.directions", cfg.perturb.directions, 0);
    r.positive("perturb.step", cfg.perturb.step);
    r.list("perturb.direction", cfg.perturb.direction, false);
    r.boolean("perturb.calibrate", cfg.perturb.calibrate);

    r.positive("calibrate.h_target", cfg.calibrate.h_target);
    r.positive("calibrate.convergence_h", cfg.calibrate.convergence_h);
    r.number("calibrate.convergence_grading", cfg.calibrate.convergence_grading);
    r.integer("calibrate.refinements", cfg.calibrate.refinements, 1);

    if (auto s = r.raw("output.dir")) cfg.out_dir = *s;
    if (auto s = r.raw("output.store")) cfg.store_dir = *s;
    r.boolean("output.cache", cfg.cache);

    r.unsigned64("run.seed", cfg.seed);
    r.integer("run.threads", cfg.threads, 1);

    r.reject_unknown();
    finalize(cfg);
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file " + path.string(), path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str(), path.string());
}

void apply_environment(RunConfig& cfg) {
    if (const char* out = std::getenv("Z2S_OUT"); out && *out) cfg.out_dir = out;
    if (const char* th = std::getenv("Z2S_THREADS"); th && *th) {
        int v = 0;
        const std::string s = th;
        const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || p != s.data() + s.size() || v < 1) {
            throw ConfigError("Z2S_THREADS must be a positive integer", "Z2S_THREADS");
        }
        cfg.threads = v;
    }
    finalize(cfg);
}

void finalize(RunConfig& cfg) {
    cfg.policy.solver.seed = cfg.seed;
    cfg.search.policy = cfg.policy;
    cfg.search.threads = cfg.threads;
    cfg.rigidity.seed = cfg.seed;
    cfg.rigidity.threads = cfg.threads;
    cfg.rigidity.tol_crit = cfg.search.tol_crit;
}

}  // namespace z2cli
