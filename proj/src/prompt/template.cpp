#include "evolve/prompt/template.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <vector>

#include "evolve/errors.hpp"

namespace evolve {
namespace {

constexpr std::string_view kIncludePrefix = "##include:";
constexpr std::string_view kMarker = "##";

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw TemplateError("cannot read prompt file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::filesystem::path resolve(const std::filesystem::path& dir, const std::string& name) {
    auto with_ext = dir / (name + ".txt");
    if (std::filesystem::exists(with_ext)) return with_ext;
    return dir / name;
}

std::string join_chain(const std::vector<std::string>& chain, const std::string& last) {
    std::string out;
    for (const auto& c : chain) out += c + " -> ";
    return out + last;
}

std::string strip_final_newline(std::string s) {
    if (!s.empty() && s.back() == '\n') s.pop_back();
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

std::string expand(const std::string& body, const std::filesystem::path& asset_dir,
                   std::vector<std::string>& chain) {
    std::string out;
    std::size_t pos = 0;
    while (true) {
        const auto start = body.find(kIncludePrefix, pos);
        if (start == std::string::npos) break;
        const auto name_begin = start + kIncludePrefix.size();
        const auto end = body.find(kMarker, name_begin);
        if (end == std::string::npos)
            throw TemplateError("unterminated include directive in " + join_chain(chain, "?"));
        const std::string fragment = body.substr(name_begin, end - name_begin);
        if (std::find(chain.begin(), chain.end(), fragment) != chain.end())
            throw TemplateError("include cycle: " + join_chain(chain, fragment));
        if (static_cast<int>(chain.size()) > kMaxIncludeDepth)
            throw TemplateError("include depth exceeds " + std::to_string(kMaxIncludeDepth) + ": " +
                                join_chain(chain, fragment));
        const auto path = resolve(asset_dir / "fragments", fragment);
        if (!std::filesystem::exists(path))
            throw TemplateError("missing include fragment '" + fragment + "' (" +
                                join_chain(chain, fragment) + ")");
        chain.push_back(fragment);
        std::string inner = expand(strip_final_newline(read_file(path)), asset_dir, chain);
        chain.pop_back();
        out.append(body, pos, start - pos);
        out += inner;
        pos = end + kMarker.size();
    }
    out.append(body, pos, std::string::npos);
    return out;
}

bool is_key(std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) {
        return std::isalnum(c) || c == '_';
    });
}

}  // namespace

Template load_template(const std::string& name, const std::filesystem::path& asset_dir) {
    const auto path = resolve(asset_dir, name);
    if (!std::filesystem::exists(path)) throw TemplateError("missing prompt template " + path.string());
    std::vector<std::string> chain{name};
    return Template{name, expand(read_file(path), asset_dir, chain), path};
}

std::string render(const Template& tmpl, const Bindings& bindings) {
    const std::string& body = tmpl.body;
    std::string out;
    out.reserve(body.size());
    std::size_t pos = 0;
    while (pos < body.size()) {
        const auto open = body.find(kMarker, pos);
        if (open == std::string::npos) break;
        const auto close = body.find(kMarker, open + kMarker.size());
        if (close == std::string::npos) break;
        const std::string_view key(body.data() + open + 2, close - open - 2);
        if (!is_key(key)) {
            out.append(body, pos, open + 1 - pos);
            pos = open + 1;
            continue;
        }
        auto it = bindings.find(key);
        if (it == bindings.end())
            throw TemplateError("unbound placeholder '" + std::string(key) + "' in template " +
                                tmpl.name);
        out.append(body, pos, open - pos);
        out += it->second;
        pos = close + kMarker.size();
    }
    out.append(body, pos, std::string::npos);
    return out;
}

const Template& PromptLibrary::get(const std::string& name) {
    std::lock_guard lock(mu_);
    auto it = cache_.find(name);
    if (it == cache_.end()) it = cache_.emplace(name, load_template(name, asset_dir_)).first;
    return it->second;
}

std::string PromptLibrary::render(const std::string& name, const Bindings& bindings) {
    return evolve::render(get(name), bindings);
}

}  // namespace evolve
