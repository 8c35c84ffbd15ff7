#pragma once

#include <stdexcept>
#include <string>

namespace cart {

// Config file failed to parse or validate. CLI exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A required upstream artifact is missing. CLI exit code 3.
struct MissingArtifactError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// An artifact carries an unexpected schema_version. CLI exit code 4.
struct SchemaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace cart
