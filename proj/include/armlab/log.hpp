#pragma once

#include <string_view>

namespace armlab {

void log_warning(std::string_view message);
void log_info(std::string_view message);

/// Suppresses info lines (warnings still go to stderr).
void set_quiet(bool quiet);

}  // namespace armlab
