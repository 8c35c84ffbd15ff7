#include "cart/toml.hpp"

#include <cctype>
#include <cstdlib>
#include <sstream>
#include <vector>

#include "cart/error.hpp"

namespace cart {

namespace {

struct ParseContext {
    const std::string& filename;
    size_t line = 0;

    [[noreturn]] void fail(const std::string& message) const {
        throw ConfigError(filename + ":" + std::to_string(line) + ": " + message);
    }
};

std::string strip_comment(const std::string& line) {
    bool in_string = false;
    for (size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (in_string) {
            if (c == '\\') {
                ++i;
            } else if (c == '"') {
                in_string = false;
            }
        } else if (c == '"') {
            in_string = true;
        } else if (c == '#') {
            return line.substr(0, i);
        }
    }
    return line;
}

std::string trim(const std::string& s) {
    size_t lo = 0;
    size_t hi = s.size();
    while (lo < hi && std::isspace(static_cast<unsigned char>(s[lo]))) {
        ++lo;
    }
    while (hi > lo && std::isspace(static_cast<unsigned char>(s[hi - 1]))) {
        --hi;
    }
    return s.substr(lo, hi - lo);
}

bool valid_bare_key(const std::string& key) {
    if (key.empty()) {
        return false;
    }
    for (char c : key) {
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') {
            return false;
        }
    }
    return true;
}

std::vector<std::string> split_dotted(const ParseContext& ctx, const std::string& path) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : path) {
        if (c == '.') {
            parts.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    parts.push_back(trim(cur));
    for (const auto& p : parts) {
        if (!valid_bare_key(p)) {
            ctx.fail("bad table path '" + path + "'");
        }
    }
    return parts;
}

std::string parse_string(const ParseContext& ctx, const std::string& s) {
    if (s.size() < 2 || s.front() != '"' || s.back() != '"') {
        ctx.fail("malformed string " + s);
    }
    std::string out;
    for (size_t i = 1; i + 1 < s.size(); ++i) {
        const char c = s[i];
        if (c != '\\') {
            out += c;
            continue;
        }
        if (i + 2 >= s.size()) {
            ctx.fail("dangling escape in string");
        }
        ++i;
        switch (s[i]) {
            case '"':
                out += '"';
                break;
            case '\\':
                out += '\\';
                break;
            case 'n':
                out += '\n';
                break;
            case 't':
                out += '\t';
                break;
            case 'r':
                out += '\r';
                break;
            default:
                ctx.fail(std::string("unsupported escape \\") + s[i]);
        }
    }
    return out;
}

std::vector<std::string> split_array_items(const ParseContext& ctx, const std::string& body) {
    std::vector<std::string> items;
    std::string cur;
    int depth = 0;
    bool in_string = false;
    for (size_t i = 0; i < body.size(); ++i) {
        const char c = body[i];
        if (in_string) {
            cur += c;
            if (c == '\\' && i + 1 < body.size()) {
                cur += body[++i];
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"') {
            in_string = true;
            cur += c;
        } else if (c == '[') {
            ++depth;
            cur += c;
        } else if (c == ']') {
            --depth;
            if (depth < 0) {
                ctx.fail("unbalanced brackets in array");
            }
            cur += c;
        } else if (c == ',' && depth == 0) {
            items.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (in_string || depth != 0) {
        ctx.fail("unterminated array or string");
    }
    const std::string last = trim(cur);
    if (!last.empty()) {
        items.push_back(last);
    } else if (!items.empty()) {
        ctx.fail("trailing comma in array");
    }
    return items;
}

bool looks_like_integer(const std::string& s) {
    size_t i = (s[0] == '+' || s[0] == '-') ? 1 : 0;
    if (i >= s.size()) {
        return false;
    }
    for (; i < s.size(); ++i) {
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) {
            return false;
        }
    }
    return true;
}

Json parse_value(const ParseContext& ctx, const std::string& raw) {
    const std::string s = trim(raw);
    if (s.empty()) {
        ctx.fail("missing value");
    }
    if (s == "true") {
        return Json(true);
    }
    if (s == "false") {
        return Json(false);
    }
    if (s.front() == '"') {
        return Json(parse_string(ctx, s));
    }
    if (s.front() == '[') {
        if (s.back() != ']') {
            ctx.fail("unterminated array");
        }
        Json arr = Json::array();
        for (const auto& item : split_array_items(ctx, s.substr(1, s.size() - 2))) {
            arr.push_back(parse_value(ctx, item));
        }
        return arr;
    }
    if (looks_like_integer(s)) {
        errno = 0;
        char* end = nullptr;
        const long long v = std::strtoll(s.c_str(), &end, 10);
        if (errno != 0 || end != s.c_str() + s.size()) {
            ctx.fail("integer out of range: " + s);
        }
        return Json(v);
    }
    {
        char* end = nullptr;
        const double v = std::strtod(s.c_str(), &end);
        if (end == s.c_str() + s.size() && std::isfinite(v)) {
            return Json(v);
        }
    }
    ctx.fail("cannot parse value '" + s + "'");
}

Json* navigate(ParseContext& ctx, Json& root, const std::vector<std::string>& parts,
               size_t depth) {
    Json* node = &root;
    for (size_t i = 0; i < depth; ++i) {
        Json& child = (*node)[parts[i]];
        if (child.is_null()) {
            child = Json::object();
        }
        if (child.is_array()) {
            if (child.empty() || !child.back().is_object()) {
                ctx.fail("path component '" + parts[i] + "' is not a table");
            }
            node = &child.back();
        } else if (child.is_object()) {
            node = &child;
        } else {
            ctx.fail("path component '" + parts[i] + "' is not a table");
        }
    }
    return node;
}

}  // namespace

Json parse_toml(const std::string& text, const std::string& filename) {
    ParseContext ctx{filename};
    Json root = Json::object();
    Json* current = &root;
    std::istringstream in(text);
    std::string raw_line;
    while (std::getline(in, raw_line)) {
        ++ctx.line;
        const std::string line = trim(strip_comment(raw_line));
        if (line.empty()) {
            continue;
        }
        if (line.rfind("[[", 0) == 0) {
            if (line.size() < 4 || line.substr(line.size() - 2) != "]]") {
                ctx.fail("malformed array-of-tables header");
            }
            const auto parts = split_dotted(ctx, line.substr(2, line.size() - 4));
            Json* parent = navigate(ctx, root, parts, parts.size() - 1);
            Json& slot = (*parent)[parts.back()];
            if (slot.is_null()) {
                slot = Json::array();
            }
            if (!slot.is_array()) {
                ctx.fail("'" + parts.back() + "' is already a non-array value");
            }
            slot.push_back(Json::object());
            current = &slot.back();
            continue;
        }
        if (line.front() == '[') {
            if (line.back() != ']') {
                ctx.fail("malformed table header");
            }
            const auto parts = split_dotted(ctx, line.substr(1, line.size() - 2));
            Json* parent = navigate(ctx, root, parts, parts.size() - 1);
            Json& slot = (*parent)[parts.back()];
            if (slot.is_null()) {
                slot = Json::object();
            }
            if (!slot.is_object()) {
                ctx.fail("'" + parts.back() + "' is already a non-table value");
            }
            current = &slot;
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos) {
            ctx.fail("expected 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        if (!valid_bare_key(key)) {
            ctx.fail("bad key '" + key + "'");
        }
        if (current->contains(key)) {
            ctx.fail("duplicate key '" + key + "'");
        }
        (*current)[key] = parse_value(ctx, line.substr(eq + 1));
    }
    return root;
}

Json load_toml_file(const std::string& path) {
    return parse_toml(read_text_file(path), path);
}

}  // namespace cart
