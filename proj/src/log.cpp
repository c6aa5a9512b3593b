#include "lire/log.hpp"

#include <cstdio>

namespace lire {

namespace {
bool g_quiet = false;
}

void set_log_quiet(bool quiet) { g_quiet = quiet; }

void warn(const std::string& msg, Warnings* sink) {
    if (sink) sink->push_back(msg);
    if (!g_quiet) std::fprintf(stderr, "warning: %s\n", msg.c_str());
}

void info(const std::string& msg) {
    if (!g_quiet) std::fprintf(stderr, "%s\n", msg.c_str());
}

} // namespace lire
