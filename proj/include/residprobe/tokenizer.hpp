#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "residprobe/config.hpp"

namespace residprobe {

// Special token ids. Byte b encodes to id kByteOffset + b.
enum SpecialToken : int {
    TOK_PAD = 0,
    TOK_BOS = 1,
    TOK_EOT = 2,
    TOK_START_HEADER = 3,
    TOK_END_HEADER = 4,
    TOK_ROLE_SYSTEM = 5,
    TOK_ROLE_USER = 6,
    TOK_ROLE_ASSISTANT = 7,
};

// Byte-level tokenizer with role-tag special tokens. Stateless; encode/decode
// is an exact inverse pair on arbitrary byte strings. Special literals are
// bracketed so plain byte text can never collide with them after a round trip.
class Tokenizer {
  public:
    static const std::vector<std::string>& special_literals();

    // Greedy left-to-right scan: a special literal at the cursor becomes its
    // single id, any other byte b becomes kByteOffset + b.
    static std::vector<int> encode(std::string_view text);

    static std::string decode(const std::vector<int>& ids);
    static std::string decode_token(int id);

    static int byte_token(unsigned char b) { return kByteOffset + static_cast<int>(b); }
    static bool is_special(int id) { return id >= 0 && id < kNumSpecialTokens; }
    static bool is_valid(int id, int vocab_size) { return id >= 0 && id < vocab_size; }
};

} // namespace residprobe
