#pragma once

#include <spdlog/spdlog.h>

namespace sfm {

/// Shared stderr logger. The level is read once from the SFM_LOG environment
/// variable (trace, debug, info, warn, error, off); default is warn.
spdlog::logger& log();

}  // namespace sfm
