#include "cart/manifest.hpp"

namespace cart {

Json manifest_to_json(const RunManifest& manifest) {
    Json doc;
    doc["schema_version"] = 1;
    doc["command"] = manifest.command;
    doc["config_path"] = manifest.config_path;
    doc["seed"] = manifest.seed;
    doc["tool_version"] = manifest.tool_version;
    doc["inputs"] = manifest.inputs;
    doc["outputs"] = manifest.outputs;
    doc["config"] = manifest.config_snapshot;
    doc["wall_clock_seconds"] = manifest.wall_clock_seconds;
    return doc;
}

void save_manifest(const RunManifest& manifest, const std::string& path) {
    save_json_file(path, manifest_to_json(manifest));
}

}  // namespace cart
