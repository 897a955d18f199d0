#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <string>

namespace evolve {

/// A prompt whose include directives are already resolved.
struct Template {
    std::string name;
    std::string body;
    std::filesystem::path source_path;
};

using Bindings = std::map<std::string, std::string, std::less<>>;

inline constexpr int kMaxIncludeDepth = 8;

/// Reads `<asset_dir>/<name>.txt` (or `<asset_dir>/<name>` verbatim) and
/// splices every `##include:fragment##` with `<asset_dir>/fragments/<fragment>.txt`,
/// recursively. Throws TemplateError on missing files, cycles, or excessive depth.
Template load_template(const std::string& name, const std::filesystem::path& asset_dir);

/// Replaces each `##key##` with its binding. Values are spliced verbatim and
/// never rescanned. Throws TemplateError naming the first unbound key.
std::string render(const Template& tmpl, const Bindings& bindings);

/// Caches templates loaded from one asset directory.
class PromptLibrary {
public:
    explicit PromptLibrary(std::filesystem::path asset_dir) : asset_dir_(std::move(asset_dir)) {}

    const Template& get(const std::string& name);
    std::string render(const std::string& name, const Bindings& bindings);
    const std::filesystem::path& asset_dir() const noexcept { return asset_dir_; }

private:
    std::filesystem::path asset_dir_;
    std::mutex mu_;
    std::map<std::string, Template, std::less<>> cache_;
};

}  // namespace evolve
