#pragma once

#include <span>
#include <string>
#include <vector>

#include "residprobe/common.hpp"

namespace residprobe {

enum class CapturePoint { block_input, block_output };

enum class EditKind { add, zero, color };

struct PositionSelector {
    enum class Kind { all, last, offset, span };
    Kind kind = Kind::all;
    int offset = 0;    // offset kind; negative addresses from the end
    int begin = 0;     // span kind, inclusive
    int end = 0;       // span kind, exclusive

    static PositionSelector all() { return {}; }
    static PositionSelector last() { return {Kind::last, 0, 0, 0}; }
    static PositionSelector at_offset(int k) { return {Kind::offset, k, 0, 0}; }
    static PositionSelector span(int begin, int end) { return {Kind::span, 0, begin, end}; }
};

// Positions a selector resolves to for a sequence of length seq_len.
// offset(k) resolves to seq_len + k for negative k (and k itself otherwise),
// so it re-resolves against the growing sequence during generation.
std::vector<int> resolve_positions(const PositionSelector& sel, int seq_len);

// Declarative residual-stream edit. `direction` holds either one shared
// vector or one vector per model layer; layers lists where it applies.
struct InterventionSpec {
    EditKind kind = EditKind::add;
    std::vector<int> layers;
    PositionSelector positions;
    std::vector<std::vector<float>> direction;
    float multiplier = 0.0f;
    CapturePoint point = CapturePoint::block_output;
    std::string vector_ref; // file path used by the JSON form

    std::span<const float> direction_for_layer(int layer) const;
};

struct CaptureSpec {
    std::vector<int> layers;
    PositionSelector positions;
    CapturePoint point = CapturePoint::block_output;
};

// r + multiplier * direction. direction must be unit length within 1e-4.
void apply_add(std::span<float> residual, std::span<const float> direction, float multiplier);

// r - (r . direction) direction; the result is orthogonal to direction.
void apply_zero(std::span<float> residual, std::span<const float> direction);

// Expands a coloring request into one edit per layer, restricted to the text
// span, applied at block_input so the layer-0 edit lands on the embedding
// output. The answer position must lie outside the span.
std::vector<InterventionSpec> color_span(const std::vector<std::vector<float>>& per_layer_direction,
                                         int n_layers, int span_begin, int span_end,
                                         float multiplier, int answer_position,
                                         EditKind kind = EditKind::add);

// JSON (de)serialization; directions go through vector_ref, never inline.
std::string intervention_to_json(const InterventionSpec& spec);
InterventionSpec intervention_from_json(const std::string& text);

double vec_dot(std::span<const float> a, std::span<const float> b);
double vec_norm(std::span<const float> a);
void vec_normalize(std::vector<float>& v, int layer_for_error = -1, int slot_for_error = -1);

} // namespace residprobe
