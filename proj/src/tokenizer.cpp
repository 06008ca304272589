#include "residprobe/tokenizer.hpp"

#include <stdexcept>

namespace residprobe {

const std::vector<std::string>& Tokenizer::special_literals() {
    static const std::vector<std::string> lits = {
        "<|pad|>",
        "<|begin_of_text|>",
        "<|eot_id|>",
        "<|start_header_id|>",
        "<|end_header_id|>",
        "<|system|>",
        "<|user|>",
        "<|assistant|>",
    };
    return lits;
}

std::vector<int> Tokenizer::encode(std::string_view text) {
    const auto& lits = special_literals();
    std::vector<int> out;
    out.reserve(text.size());
    size_t i = 0;
    while (i < text.size()) {
        int matched = -1;
        if (text[i] == '<') {
            for (int s = 0; s < kNumSpecialTokens; ++s) {
                const std::string& lit = lits[s];
                if (text.compare(i, lit.size(), lit) == 0) {
                    matched = s;
                    break;
                }
            }
        }
        if (matched >= 0) {
            out.push_back(matched);
            i += lits[matched].size();
        } else {
            out.push_back(byte_token(static_cast<unsigned char>(text[i])));
            ++i;
        }
    }
    return out;
}

std::string Tokenizer::decode(const std::vector<int>& ids) {
    std::string out;
    for (int id : ids) out += decode_token(id);
    return out;
}

std::string Tokenizer::decode_token(int id) {
    if (id < 0 || id >= kMinVocab)
        throw DataError("decode: token id out of range: " + std::to_string(id));
    if (id < kNumSpecialTokens) return special_literals()[id];
    return std::string(1, static_cast<char>(id - kByteOffset));
}

} // namespace residprobe
