#pragma once

#include <optional>
#include <string>
#include <vector>

#include "residprobe/dataset.hpp"
#include "residprobe/model.hpp"
#include "residprobe/prompts.hpp"
#include "residprobe/steering.hpp"

namespace residprobe {

// Matched prompts differing only in the evaluated text (and the balanced A/B
// assignment of the answer options).
struct ContrastPair {
    std::string source_id;
    std::vector<int> prompt_self;
    std::vector<int> prompt_other;
    int correct_self = 0;  // kTokA or kTokB
    int correct_other = 0;
    int rotation = 0;
    bool self_is_b = false;
    bool both_correct = false;
};

// Builds one pair per record; rotation cycles through the four option
// wordings and the self/other assignment alternates so a batch of 2n prompts
// has exactly n with self as option A.
std::vector<ContrastPair> make_contrast_pairs(const std::vector<DatasetRecord>& records,
                                              bool include_context);

struct ScreenOptions {
    // Optional confidence floor on the chosen answer's probability; judgments
    // below it count as incorrect. Disabled by default.
    std::optional<double> confidence_threshold;
    int n_threads = 1;
};

// Keeps pairs where the higher-probability answer token is correct for both
// the self and the other presentation.
std::vector<ContrastPair> screen_pairs(const WeightSet& w, const std::vector<ContrastPair>& pairs,
                                       const ScreenOptions& opts = {});

struct ExtractOptions {
    int k_window = 10; // capture the final K prompt tokens
    CapturePoint point = CapturePoint::block_output;
    int n_threads = 1;
    std::string provenance;
};

// Mean difference between activations on self- and other-presentations at
// each layer and each of the final K token slots, unit-normalized. Returns
// one SteeringVector per slot; slot K-2 (the final token before the model's
// response) is the primary one.
std::vector<SteeringVector> extract_vector(const WeightSet& w,
                                           const std::vector<ContrastPair>& pairs,
                                           const ExtractOptions& opts = {});

// Nuisance direction from the built-in minimal-pair battery (A/B, Yes/No,
// pronouns): per-pair activation differences at the pre-answer token,
// normalized then averaged per layer. Pairs whose difference is numerically
// zero are skipped and counted.
struct NuisanceOutcome {
    NuisanceVector vector;
    int pairs_used = 0;
    int pairs_skipped = 0;
};
NuisanceOutcome extract_nuisance(const WeightSet& w, CapturePoint point = CapturePoint::block_output,
                                 int n_threads = 1);

struct DecodedToken {
    int token = 0;
    float score = 0.0f;
};

struct LogitLensReadout {
    std::vector<DecodedToken> positive; // top-k for +v
    std::vector<DecodedToken> negative; // top-k for -v
};

// Ranks tokens by unembed(final_norm(v)) for +v and -v separately.
LogitLensReadout logit_lens_decode(const WeightSet& w, const std::vector<float>& v, int top_k);

} // namespace residprobe
