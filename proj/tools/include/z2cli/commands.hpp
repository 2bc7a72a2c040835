#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "z2cli/config.hpp"
#include "z2cli/report.hpp"

namespace z2cli {

const std::vector<std::string>& command_names();

/// Runs one subcommand: writes its artifacts under cfg.out_dir, prints a short
/// summary to `out` and returns the machine-readable result document.
/// Library errors propagate as z2s::Error.
json run_command(const std::string& name, const RunConfig& cfg, std::ostream& out);

/// Error document written on failure: code, message, offending input path and line.
json error_document(const z2s::Error& e, const std::string& input_path);

/// 0 ok, 1 numerical failure, 2 input error.
int exit_code_for(const z2s::Error& e);

}  // namespace z2cli
