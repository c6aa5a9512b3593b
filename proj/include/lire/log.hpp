#pragma once

#include <string>
#include <vector>

namespace lire {

/// Optional collector for non-fatal diagnostics. Loaders and builders append
/// warnings here when a sink is supplied and always echo them to stderr.
using Warnings = std::vector<std::string>;

void warn(const std::string& msg, Warnings* sink = nullptr);
void info(const std::string& msg);

/// Silences info/warn echoing to stderr (warnings still reach sinks).
void set_log_quiet(bool quiet);

} // namespace lire
