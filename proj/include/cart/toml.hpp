#pragma once

#include <string>

#include "cart/jsonio.hpp"

namespace cart {

// Parses the TOML subset used by run configs: [table] and [[array-of-table]]
// headers with dotted paths, bare keys, strings, integers, floats, booleans,
// single-line arrays, and # comments. Errors carry file:line positions.
Json parse_toml(const std::string& text, const std::string& filename);

Json load_toml_file(const std::string& path);

}  // namespace cart
