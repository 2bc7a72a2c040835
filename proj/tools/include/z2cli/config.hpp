#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "z2spectra/errors.hpp"
#include "z2spectra/rigidity.hpp"

namespace z2cli {

/// Input error that knows where in the config file it came from.
class ConfigError : public z2s::Error {
public:
    ConfigError(const std::string& message, std::string path, int line = 0)
        : z2s::Error(z2s::ErrorCode::InputError, message), path_(std::move(path)), line_(line) {}

    const std::string& path() const { return path_; }
    int line() const { return line_; }

private:
    std::string path_;
    int line_;
};

struct PerturbSettings {
    int directions = 10;
    double step = 5e-3;
    std::vector<double> direction;  // optional explicit realified v
    bool calibrate = true;
};

struct CalibrateSettings {
    double h_target = 0.05;
    double convergence_h = 0.1;
    double convergence_grading = 3.0;
    int refinements = 3;
};

struct RunConfig {
    std::filesystem::path source;  // config file, empty for built-in presets
    std::string preset;            // tetrahedron | antipodal | untwisted | "" (explicit points)
    std::vector<z2s::Vec3> points;
    z2s::WindowPolicy policy;
    z2s::SearchParams search;
    z2s::RigidityOptions rigidity;
    PerturbSettings perturb;
    CalibrateSettings calibrate;
    std::filesystem::path out_dir = "z2s_out";
    std::filesystem::path store_dir;  // empty: <out>/store
    bool cache = true;
    std::uint64_t seed = 0;
    int threads = 1;

    z2s::Configuration configuration() const;
};

/// Parses an INI file with [configuration], [mesh], [window], [solver],
/// [expansion], [search], [verify], [perturb], [calibrate], [output] and [run]
/// sections. Unknown keys are rejected with their line number.
RunConfig load_config(const std::filesystem::path& path);

/// Same, from text; `origin` is used in error messages.
RunConfig parse_config(const std::string& text, const std::string& origin);

/// Z2S_OUT and Z2S_THREADS override the output directory and thread count.
void apply_environment(RunConfig& cfg);

/// Propagates seed and thread count into the nested option blocks.
void finalize(RunConfig& cfg);

}  // namespace z2cli
