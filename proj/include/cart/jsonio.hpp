#pragma once

#include <string>

#include "json.hpp"

namespace cart {

// Insertion-ordered documents so emitted artifacts have stable key order.
using Json = nlohmann::ordered_json;

// Decimal form with 17 significant digits; round-trips any finite double
// bit-exactly. Throws on non-finite input.
std::string format_double(double v);

// Serializer used for every artifact this tool writes: keys in insertion
// order, floating-point numbers via format_double.
std::string emit_json(const Json& doc, int indent = 2);

std::string read_text_file(const std::string& path);  // MissingArtifactError if absent
void write_text_file(const std::string& path, const std::string& content);

Json load_json_file(const std::string& path);
void save_json_file(const std::string& path, const Json& doc);

// Throws SchemaError unless doc["schema_version"] == expected.
void check_schema(const Json& doc, int expected, const std::string& what);

}  // namespace cart
