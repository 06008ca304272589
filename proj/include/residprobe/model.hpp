#pragma once

#include <optional>
#include <span>
#include <vector>

#include "residprobe/intervene.hpp"
#include "residprobe/weights.hpp"

namespace residprobe {

struct TokenDistribution {
    std::vector<float> logits;
    std::vector<float> log_probs; // logits - logsumexp(logits)

    int argmax() const;
    float log_prob(int token) const { return log_probs.at(static_cast<size_t>(token)); }
};

// Captured residual-stream activations indexed by (layer, position).
struct ResidualTape {
    std::vector<int> layers;
    std::vector<int> positions;
    CapturePoint point = CapturePoint::block_output;
    int d_model = 0;
    std::vector<float> values; // [layer][position][d_model]

    std::span<const float> at(int layer, int position) const;
    std::span<float> at_mut(int layer, int position);
};

struct ForwardResult {
    std::vector<TokenDistribution> dists; // one per input position
    std::optional<ResidualTape> tape;
};

// Causal-masked decoder forward pass with residual-stream instrumentation.
//
// The residual stream is initialized from token embeddings only; learned
// positions enter through the attention query/key path, so a model with all
// attention and MLP output projections zeroed maps each token to
// unembed(final_norm(tok_emb[token])) regardless of position.
//
// Edits apply at their declared capture point, before that point is captured,
// so a captured injection site reads baseline + multiplier * direction.
ForwardResult forward(const WeightSet& w, std::span<const int> tokens,
                      const std::optional<CaptureSpec>& capture = {},
                      const std::vector<InterventionSpec>& edits = {});

struct GenerateOptions {
    int max_new = 32;
    float temperature = 0.0f; // 0 = greedy
    uint64_t seed = 0;
    bool stop_at_eot = true;
};

// Returns only the newly generated tokens. Edits with relative selectors
// (last/offset) re-resolve against the growing sequence at every step.
std::vector<int> generate(const WeightSet& w, std::span<const int> prompt,
                          const GenerateOptions& opts,
                          const std::vector<InterventionSpec>& edits = {});

struct SequenceLogProb {
    std::vector<float> log_probs; // tokens[1..n) given their prefixes
    double perplexity = 0.0;      // exp(-mean(log_probs))
};

SequenceLogProb sequence_log_prob(const WeightSet& w, std::span<const int> tokens);

} // namespace residprobe
