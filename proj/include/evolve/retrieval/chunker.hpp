#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace evolve {

struct TextChunk {
    std::size_t offset = 0;
    std::string text;
};

/// Fixed-size character windows starting at 0, stride = size - overlap, ending
/// with the first window that reaches the end of the content. The final chunk
/// may be short; empty content gives no chunks. Requires size > overlap.
std::vector<TextChunk> chunk_text(std::string_view content, std::size_t size = 500, std::size_t overlap = 100);

}  // namespace evolve
