#include "evolve/retrieval/chunker.hpp"

#include <algorithm>
#include <stdexcept>

namespace evolve {

std::vector<TextChunk> chunk_text(std::string_view content, std::size_t size, std::size_t overlap) {
    if (size == 0 || overlap >= size) throw std::invalid_argument("chunk size must exceed overlap");
    std::vector<TextChunk> chunks;
    const std::size_t stride = size - overlap;
    for (std::size_t start = 0; start < content.size(); start += stride) {
        const std::size_t len = std::min(size, content.size() - start);
        chunks.push_back({start, std::string(content.substr(start, len))});
        if (start + len == content.size()) break;
    }
    return chunks;
}

}  // namespace evolve
