#pragma once

#include <cstdint>
#include <string>

#include "residprobe/common.hpp"

namespace residprobe {

// Byte-level vocabulary: 8 special ids followed by the 256 byte ids.
constexpr int kNumSpecialTokens = 8;
constexpr int kByteOffset = 8;
constexpr int kMinVocab = kNumSpecialTokens + 256;

struct ModelConfig {
    int n_layers = 4;
    int d_model = 64;
    int n_heads = 4;
    int d_ff = 128;
    int vocab_size = kMinVocab;
    int max_seq_len = 512;
    float norm_epsilon = 1e-5f;
    uint64_t seed = 0;

    int head_dim() const { return d_model / n_heads; }

    void validate() const {
        if (n_layers < 1 || d_model < 1 || n_heads < 1 || d_ff < 1 || max_seq_len < 1)
            throw UsageError("model config: all dimensions must be >= 1");
        if (d_model % n_heads != 0)
            throw UsageError("model config: d_model must be divisible by n_heads");
        if (vocab_size < kMinVocab)
            throw UsageError("model config: vocab_size must be >= " + std::to_string(kMinVocab));
    }

    bool operator==(const ModelConfig&) const = default;
};

std::string config_to_json(const ModelConfig& c);
ModelConfig config_from_json(const std::string& text);

} // namespace residprobe
