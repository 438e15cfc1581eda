#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "wigp/eval.hpp"
#include "wigp/train.hpp"

namespace wigp {

/// Process exit codes of the command-line tool.
enum ExitCode : int { exit_ok = 0, exit_usage = 1, exit_data = 2, exit_numerical = 3 };

/// Runs one command line (without the program name). Tables and plain
/// results go to `out`; diagnostics and the effective-config line go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// A fitted model as stored on disk.
struct ModelFile {
    Variant variant = Variant::gp;
    TrainedModel model;
};

/// Versioned plain-text model format (first line "wigp-model 1").
std::string serialize_model(const ModelFile& file);
ModelFile parse_model(const std::string& text);

/// Default kernel of each variant in standardized units. The seasonal kernel
/// fixes the period at `period` (in standardized input steps).
std::string default_kernel(Variant variant, double period = 10.0);

}  // namespace wigp
