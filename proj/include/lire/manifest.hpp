#pragma once

#include <cstdint>
#include <map>
#include <string>

#include <json.hpp>

namespace lire {

/// Reproducibility record written next to every produced artifact as
/// <artifact>.manifest.json (atomically). Captures the exact command, the
/// effective config after defaults, the seeds, and content digests of inputs
/// and outputs; wall-clock fields are the only non-deterministic part.
struct RunManifest {
    std::string command_line;
    nlohmann::ordered_json config = nlohmann::ordered_json::object();
    uint64_t seed = 0;
    std::map<std::string, std::string> input_digests;    // path -> crc32 hex
    std::map<std::string, std::string> artifact_digests; // path -> crc32 hex
    std::string started_at; // ISO 8601 UTC
    double wall_seconds = 0.0;
    std::string kernel_backend;

    void add_input(const std::string& path);
    void add_artifact(const std::string& path);
    std::string to_json() const;
};

std::string iso8601_utc_now();

/// Writes <artifact>.manifest.json beside the artifact.
void write_manifest(const RunManifest& manifest, const std::string& artifact_path);

} // namespace lire
