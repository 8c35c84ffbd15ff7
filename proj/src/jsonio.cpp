#include "cart/jsonio.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "cart/error.hpp"

namespace cart {

std::string format_double(double v) {
    if (!std::isfinite(v)) {
        throw std::runtime_error("refusing to serialize non-finite value");
    }
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

void emit(const Json& node, std::string& out, int indent, int depth) {
    const std::string pad(static_cast<size_t>(indent) * depth, ' ');
    const std::string pad_in(static_cast<size_t>(indent) * (depth + 1), ' ');
    switch (node.type()) {
        case Json::value_t::object: {
            if (node.empty()) {
                out += "{}";
                return;
            }
            out += "{\n";
            size_t i = 0;
            for (auto it = node.begin(); it != node.end(); ++it, ++i) {
                out += pad_in;
                out += Json(it.key()).dump();
                out += ": ";
                emit(it.value(), out, indent, depth + 1);
                if (i + 1 < node.size()) {
                    out += ",";
                }
                out += "\n";
            }
            out += pad + "}";
            return;
        }
        case Json::value_t::array: {
            if (node.empty()) {
                out += "[]";
                return;
            }
            // flat arrays of scalars stay on one line
            bool scalars_only = true;
            for (const auto& e : node) {
                if (e.is_structured()) {
                    scalars_only = false;
                    break;
                }
            }
            if (scalars_only) {
                out += "[";
                for (size_t i = 0; i < node.size(); ++i) {
                    if (i > 0) {
                        out += ", ";
                    }
                    emit(node[i], out, indent, depth);
                }
                out += "]";
                return;
            }
            out += "[\n";
            for (size_t i = 0; i < node.size(); ++i) {
                out += pad_in;
                emit(node[i], out, indent, depth + 1);
                if (i + 1 < node.size()) {
                    out += ",";
                }
                out += "\n";
            }
            out += pad + "]";
            return;
        }
        case Json::value_t::number_float:
            out += format_double(node.get<double>());
            return;
        default:
            out += node.dump();
            return;
    }
}

}  // namespace

std::string emit_json(const Json& doc, int indent) {
    std::string out;
    emit(doc, out, indent, 0);
    out += "\n";
    return out;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw MissingArtifactError("missing file: " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) {
        std::filesystem::create_directories(parent);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open for writing: " + path);
    }
    out << content;
    if (!out) {
        throw std::runtime_error("write failed: " + path);
    }
}

Json load_json_file(const std::string& path) {
    const std::string text = read_text_file(path);
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error("invalid JSON in " + path + ": " + e.what());
    }
}

void save_json_file(const std::string& path, const Json& doc) {
    write_text_file(path, emit_json(doc));
}

void check_schema(const Json& doc, int expected, const std::string& what) {
    if (!doc.contains("schema_version") || !doc["schema_version"].is_number_integer()) {
        throw SchemaError(what + ": missing schema_version");
    }
    const int got = doc["schema_version"].get<int>();
    if (got != expected) {
        throw SchemaError(what + ": schema_version " + std::to_string(got) + ", expected " +
                          std::to_string(expected));
    }
}

}  // namespace cart
