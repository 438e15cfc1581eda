#pragma once

#include <memory>

#include <spdlog/logger.h>

namespace wigp {

/// Shared stderr logger. Verbosity comes from the WIGP_LOG environment
/// variable (trace, debug, info, warn, error, off); default is warn.
spdlog::logger& log();

}  // namespace wigp
