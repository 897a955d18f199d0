#include "evolve/llm/json_extract.hpp"

#include <cctype>
#include <cstdio>
#include <vector>

#include "evolve/core/types.hpp"
#include "evolve/errors.hpp"

namespace evolve {
namespace {

std::optional<nlohmann::json> try_parse(std::string_view text) {
    const std::string trimmed = trim(text);
    if (trimmed.empty()) return std::nullopt;
    auto doc = nlohmann::json::parse(trimmed, nullptr, false);
    if (doc.is_discarded()) return std::nullopt;
    return doc;
}

std::optional<nlohmann::json> try_parse_or_repair(std::string_view text) {
    if (auto doc = try_parse(text)) return doc;
    return try_parse(repair_escapes(text));
}

bool is_hex4(std::string_view s, std::size_t pos) {
    if (pos + 4 > s.size()) return false;
    for (std::size_t i = pos; i < pos + 4; ++i)
        if (!std::isxdigit(static_cast<unsigned char>(s[i]))) return false;
    return true;
}

// End index (exclusive) of the balanced region opening at `start`, if any.
std::optional<std::size_t> balanced_end(std::string_view text, std::size_t start) {
    std::vector<char> stack;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < text.size(); ++i) {
        const char c = text[i];
        if (in_string) {
            if (escaped) escaped = false;
            else if (c == '\\') escaped = true;
            else if (c == '"') in_string = false;
            continue;
        }
        switch (c) {
            case '"': in_string = true; break;
            case '{': stack.push_back('}'); break;
            case '[': stack.push_back(']'); break;
            case '}':
            case ']':
                if (stack.empty() || stack.back() != c) return std::nullopt;
                stack.pop_back();
                if (stack.empty()) return i + 1;
                break;
            default: break;
        }
    }
    return std::nullopt;
}

}  // namespace

std::string repair_escapes(std::string_view text) {
    std::string out;
    out.reserve(text.size() + 16);
    bool in_string = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (!in_string) {
            if (c == '"') in_string = true;
            out += c;
            continue;
        }
        if (c == '"') {
            in_string = false;
            out += c;
        } else if (c == '\\') {
            const char next = i + 1 < text.size() ? text[i + 1] : '\0';
            switch (next) {
                case 'b': case 'f':
                    // \frac, \beta: a letter after \b or \f means LaTeX, not a control char.
                    if (i + 2 < text.size() && std::isalpha(static_cast<unsigned char>(text[i + 2]))) {
                        out += "\\\\";
                        break;
                    }
                    out += c;
                    out += next;
                    ++i;
                    break;
                case '"': case '\\': case '/': case 'n': case 'r': case 't':
                    out += c;
                    out += next;
                    ++i;
                    break;
                case 'u':
                    if (is_hex4(text, i + 2)) {
                        out += "\\u";
                        ++i;
                    } else {
                        out += "\\\\";
                    }
                    break;
                default:
                    out += "\\\\";
                    break;
            }
        } else if (static_cast<unsigned char>(c) < 0x20) {
            switch (c) {
                case '\n': out += "\\n"; break;
                case '\r': out += "\\r"; break;
                case '\t': out += "\\t"; break;
                default: {
                    char buf[8];
                    std::snprintf(buf, sizeof buf, "\\u%04x", static_cast<unsigned>(c));
                    out += buf;
                }
            }
        } else {
            out += c;
        }
    }
    return out;
}

std::vector<std::string> fenced_blocks(std::string_view text) {
    std::vector<std::string> blocks;
    std::size_t pos = 0;
    while (true) {
        const auto open = text.find("```", pos);
        if (open == std::string_view::npos) break;
        auto body_start = open + 3;
        // Language tag runs to the end of the opening line.
        const auto line_end = text.find('\n', body_start);
        const auto close_probe = text.find("```", body_start);
        if (line_end != std::string_view::npos &&
            (close_probe == std::string_view::npos || line_end < close_probe)) {
            const std::string_view tag = text.substr(body_start, line_end - body_start);
            bool tag_like = true;
            for (char ch : tag)
                if (std::isspace(static_cast<unsigned char>(ch)) == 0 &&
                    std::isalnum(static_cast<unsigned char>(ch)) == 0 && ch != '-' && ch != '_')
                    tag_like = false;
            if (tag_like) body_start = line_end + 1;
        }
        const auto close = text.find("```", body_start);
        if (close == std::string_view::npos) {
            blocks.emplace_back(text.substr(body_start));
            break;
        }
        blocks.emplace_back(text.substr(body_start, close - body_start));
        pos = close + 3;
    }
    return blocks;
}

std::optional<nlohmann::json> first_balanced_json(std::string_view text) {
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] != '{' && text[i] != '[') continue;
        const auto end = balanced_end(text, i);
        if (!end) continue;
        if (auto doc = try_parse_or_repair(text.substr(i, *end - i))) return doc;
    }
    return std::nullopt;
}

nlohmann::json extract_json(std::string_view raw) {
    if (auto doc = try_parse(raw)) return *doc;

    const auto blocks = fenced_blocks(raw);
    for (const auto& block : blocks)
        if (auto doc = try_parse(block)) return *doc;

    for (const auto& block : blocks)
        if (auto doc = try_parse(repair_escapes(block))) return *doc;
    if (auto doc = try_parse(repair_escapes(raw))) return *doc;

    for (const auto& block : blocks)
        if (auto doc = first_balanced_json(block)) return *doc;
    if (auto doc = first_balanced_json(raw)) return *doc;

    throw ExtractionError("no JSON document found in model output", std::string(raw));
}

}  // namespace evolve
