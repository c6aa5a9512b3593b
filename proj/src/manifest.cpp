#include "lire/manifest.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>

#include "lire/io.hpp"
#include "lire/kernels.hpp"

namespace lire {

std::string iso8601_utc_now() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void RunManifest::add_input(const std::string& path) {
    input_digests[path] = file_digest(path);
}

void RunManifest::add_artifact(const std::string& path) {
    artifact_digests[path] = file_digest(path);
}

std::string RunManifest::to_json() const {
    nlohmann::ordered_json j;
    j["command_line"] = command_line;
    j["config"] = config;
    j["seed"] = seed;
    j["kernel_backend"] = kernel_backend.empty() ? kern::backend_name() : kernel_backend;
    nlohmann::ordered_json in = nlohmann::ordered_json::object();
    for (const auto& [path, digest] : input_digests) in[path] = digest;
    j["inputs"] = in;
    nlohmann::ordered_json out = nlohmann::ordered_json::object();
    for (const auto& [path, digest] : artifact_digests) out[path] = digest;
    j["artifacts"] = out;
    j["started_at"] = started_at;
    j["wall_seconds"] = wall_seconds;
    return j.dump(2) + "\n";
}

void write_manifest(const RunManifest& manifest, const std::string& artifact_path) {
    write_file_atomic(artifact_path + ".manifest.json", manifest.to_json());
}

} // namespace lire
