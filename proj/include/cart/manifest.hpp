#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cart/jsonio.hpp"

namespace cart {

struct RunManifest {
    std::string command;
    std::string config_path;
    Json config_snapshot;
    uint64_t seed = 0;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::string tool_version;
    double wall_clock_seconds = 0.0;
};

Json manifest_to_json(const RunManifest& manifest);
void save_manifest(const RunManifest& manifest, const std::string& path);

}  // namespace cart
