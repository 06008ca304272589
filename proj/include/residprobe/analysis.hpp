#pragma once

#include <array>

#include "residprobe/paradigms.hpp"
#include "residprobe/steering.hpp"

namespace residprobe {

struct ConditionRates {
    double claim_self = 0.0;
    double claim_other = 0.0;
    double deny_self = 0.0;
    double deny_other = 0.0;
};

struct GridCell {
    ConditionRates rates; // claim_* under +steering, deny_* under -steering
    double aggregate = 0.0;
    std::array<bool, 4> saturated{}; // component baseline at its ceiling
    int degenerate = 0;              // trials whose argmax left the answer set
};

struct EffectivenessGrid {
    std::vector<int> layers;
    std::vector<double> multipliers;
    ConditionRates baseline;
    std::vector<GridCell> cells; // layer-major

    const GridCell& cell(size_t layer_idx, size_t mult_idx) const {
        return cells.at(layer_idx * multipliers.size() + mult_idx);
    }
};

// Normalized headroom gain, averaged over the four steering conditions
// (self/other x positive/negative): 100 means complete steering in the
// intended direction, 0 matches baseline, below 0 is anti-steering.
// Components whose baseline sits at the ceiling are flagged and skipped.
double aggregate_effectiveness(const ConditionRates& baseline, const ConditionRates& steered,
                               std::array<bool, 4>* saturated = nullptr);

struct SweepOptions {
    bool include_context = true;
    int steer_offset = -2; // answer-token position, two before generation
    CapturePoint point = CapturePoint::block_output;
    int n_threads = 1;
};

// Positive and negative steering at the answer-token position for every
// (layer, multiplier) cell of an Individual-style paradigm run.
EffectivenessGrid steering_sweep(const WeightSet& w, const SteeringVector& vec,
                                 const std::vector<int>& layers,
                                 const std::vector<double>& multipliers,
                                 const std::vector<DatasetRecord>& records, Paradigm paradigm,
                                 const SweepOptions& opts);

struct ZeroingResult {
    double claim_base = 0.0;   // pooled over self and other texts
    double claim_zeroed = 0.0;
    ConditionRates base_rates;
    ConditionRates zeroed_rates;
    int n_trials = 0;
};

// Projects the vector out of the residual stream at the answer-token
// position of the declared layer and reports claim rates before/after.
ZeroingResult zeroing_run(const WeightSet& w, const SteeringVector& vec, int layer,
                          const std::vector<DatasetRecord>& records, const SweepOptions& opts);

enum class ColorTarget { self, other, both, evaluated };

struct ColoringOptions {
    EditKind kind = EditKind::add; // add or zero
    double multiplier = 4.0;       // sign selects the coloring direction
    ColorTarget target = ColorTarget::evaluated;
    bool include_context = true;
    int n_threads = 1;
};

struct ColoringResult {
    EvalReport baseline;
    EvalReport colored;
    // Probability-shift stats on the correct output token (zero-kind runs).
    int n_scored = 0;
    int n_decreased = 0;
    int n_ties = 0;
    double pct_decreasing = 0.0;
    double p_value = 1.0;
    // Paired add-kind runs: how often the choice lands on the colored text.
    double choose_colored_rate = 0.0;
    double flip_rate = 0.0; // among trials whose baseline choice was elsewhere
};

// Applies the vector to the tokens of the evaluated text(s) at every layer,
// leaving the answer position untouched, and contrasts against baseline.
ColoringResult coloring_run(const WeightSet& w, const SteeringVector& vec,
                            const std::vector<DatasetRecord>& records, Paradigm paradigm,
                            const ColoringOptions& opts);

struct ActivationMap {
    std::vector<int> layers;
    int window = 0; // token offsets from the end: column 0 is `window` back
    int reference_layer = -1; // -1: project each layer onto its own vector
    std::vector<double> values; // [layer][offset], mean over contributing texts
    std::vector<int> counts;    // texts contributing per offset

    double at(size_t layer_idx, int offset_from_end) const;
};

struct ActivationMapOptions {
    int window = 100;
    int reference_layer = -1;
    CapturePoint point = CapturePoint::block_output;
    int n_threads = 1;
};

// Mean projection of raw-text residuals onto the reference vector by (layer,
// token offset from the end); shorter texts contribute to trailing offsets.
ActivationMap activation_map(const WeightSet& w, const std::vector<std::string>& texts,
                             const SteeringVector& vec, const ActivationMapOptions& opts);

// Per-layer correlation between the final-token projection onto the vector
// and P(Yes) across Individual-paradigm trials.
std::vector<Correlation> last_token_correlation_curve(const WeightSet& w,
                                                      const SteeringVector& vec,
                                                      const std::vector<DatasetRecord>& records,
                                                      const SweepOptions& opts);

struct ScoredText {
    std::string id;
    double mean_projection = 0.0;
};

struct TopTexts {
    std::vector<ScoredText> most_positive;
    std::vector<ScoredText> most_negative;
};

// Ranks texts by mean per-token projection at the declared layer; ties break
// by id so negating the vector swaps the two lists exactly.
TopTexts top_activating_texts(const WeightSet& w,
                              const std::vector<std::pair<std::string, std::string>>& texts,
                              const SteeringVector& vec, int layer, int k,
                              CapturePoint point = CapturePoint::block_output, int n_threads = 1);

} // namespace residprobe
