#include "residprobe/intervene.hpp"

#include <cmath>
#include <nlohmann/json.hpp>

namespace residprobe {

std::vector<int> resolve_positions(const PositionSelector& sel, int seq_len) {
    if (seq_len < 1) throw UsageError("resolve_positions: sequence must be non-empty");
    std::vector<int> out;
    switch (sel.kind) {
        case PositionSelector::Kind::all:
            out.resize(static_cast<size_t>(seq_len));
            for (int i = 0; i < seq_len; ++i) out[static_cast<size_t>(i)] = i;
            break;
        case PositionSelector::Kind::last:
            out.push_back(seq_len - 1);
            break;
        case PositionSelector::Kind::offset: {
            const int idx = sel.offset < 0 ? seq_len + sel.offset : sel.offset;
            if (idx < 0 || idx >= seq_len)
                throw UsageError("resolve_positions: offset " + std::to_string(sel.offset) +
                                 " out of range for length " + std::to_string(seq_len));
            out.push_back(idx);
            break;
        }
        case PositionSelector::Kind::span: {
            if (sel.begin < 0 || sel.end > seq_len || sel.begin >= sel.end)
                throw UsageError("resolve_positions: span [" + std::to_string(sel.begin) + ", " +
                                 std::to_string(sel.end) + ") out of range for length " +
                                 std::to_string(seq_len));
            for (int i = sel.begin; i < sel.end; ++i) out.push_back(i);
            break;
        }
    }
    return out;
}

std::span<const float> InterventionSpec::direction_for_layer(int layer) const {
    if (direction.empty()) throw UsageError("intervention has no direction");
    if (direction.size() == 1) return direction[0];
    if (layer < 0 || static_cast<size_t>(layer) >= direction.size())
        throw UsageError("intervention direction table has no entry for layer " +
                         std::to_string(layer));
    return direction[static_cast<size_t>(layer)];
}

double vec_dot(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) throw UsageError("vector dimension mismatch");
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
    return s;
}

double vec_norm(std::span<const float> a) {
    double s = 0.0;
    for (float v : a) s += static_cast<double>(v) * v;
    return std::sqrt(s);
}

void vec_normalize(std::vector<float>& v, int layer_for_error, int slot_for_error) {
    const double n = vec_norm(v);
    if (n < 1e-8)
        throw DegenerateVectorError("cannot normalize near-zero vector (layer " +
                                        std::to_string(layer_for_error) + ", slot " +
                                        std::to_string(slot_for_error) + ")",
                                    layer_for_error, slot_for_error);
    const float inv = static_cast<float>(1.0 / n);
    for (auto& x : v) x *= inv;
}

namespace {

void require_unit(std::span<const float> direction) {
    const double n = vec_norm(direction);
    if (std::abs(n - 1.0) > 1e-4)
        throw UsageError("direction is not unit length (norm = " + format_double(n) + ")");
}

} // namespace

void apply_add(std::span<float> residual, std::span<const float> direction, float multiplier) {
    if (residual.size() != direction.size()) throw UsageError("apply_add: dimension mismatch");
    require_unit(direction);
    for (size_t i = 0; i < residual.size(); ++i) residual[i] += multiplier * direction[i];
}

void apply_zero(std::span<float> residual, std::span<const float> direction) {
    if (residual.size() != direction.size()) throw UsageError("apply_zero: dimension mismatch");
    require_unit(direction);
    const double proj = vec_dot(residual, direction);
    for (size_t i = 0; i < residual.size(); ++i)
        residual[i] -= static_cast<float>(proj * direction[i]);
}

std::vector<InterventionSpec> color_span(const std::vector<std::vector<float>>& per_layer_direction,
                                         int n_layers, int span_begin, int span_end,
                                         float multiplier, int answer_position, EditKind kind) {
    if (span_begin >= span_end) throw UsageError("color_span: empty span");
    if (answer_position >= span_begin && answer_position < span_end)
        throw UsageError("color_span: span overlaps the answer position");
    if (per_layer_direction.empty()) throw UsageError("color_span: no direction");
    std::vector<InterventionSpec> edits;
    edits.reserve(static_cast<size_t>(n_layers));
    for (int l = 0; l < n_layers; ++l) {
        InterventionSpec e;
        e.kind = kind;
        e.layers = {l};
        e.positions = PositionSelector::span(span_begin, span_end);
        e.direction = {per_layer_direction.size() == 1
                           ? per_layer_direction[0]
                           : per_layer_direction.at(static_cast<size_t>(l))};
        e.multiplier = multiplier;
        e.point = CapturePoint::block_input;
        edits.push_back(std::move(e));
    }
    return edits;
}

namespace {

const char* kind_name(EditKind k) {
    switch (k) {
        case EditKind::add: return "add";
        case EditKind::zero: return "zero";
        case EditKind::color: return "color";
    }
    return "add";
}

const char* point_name(CapturePoint p) {
    return p == CapturePoint::block_input ? "block_input" : "block_output";
}

nlohmann::json selector_to_json(const PositionSelector& s) {
    nlohmann::json j;
    switch (s.kind) {
        case PositionSelector::Kind::all: j["kind"] = "all"; break;
        case PositionSelector::Kind::last: j["kind"] = "last"; break;
        case PositionSelector::Kind::offset:
            j["kind"] = "offset";
            j["offset"] = s.offset;
            break;
        case PositionSelector::Kind::span:
            j["kind"] = "span";
            j["begin"] = s.begin;
            j["end"] = s.end;
            break;
    }
    return j;
}

PositionSelector selector_from_json(const nlohmann::json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "all") return PositionSelector::all();
    if (kind == "last") return PositionSelector::last();
    if (kind == "offset") return PositionSelector::at_offset(j.at("offset").get<int>());
    if (kind == "span")
        return PositionSelector::span(j.at("begin").get<int>(), j.at("end").get<int>());
    throw DataError("unknown position selector kind: " + kind);
}

} // namespace

std::string intervention_to_json(const InterventionSpec& spec) {
    nlohmann::json j;
    j["kind"] = kind_name(spec.kind);
    j["layers"] = spec.layers;
    j["selector"] = selector_to_json(spec.positions);
    j["multiplier"] = spec.multiplier;
    j["point"] = point_name(spec.point);
    j["vector_ref"] = spec.vector_ref;
    return j.dump();
}

InterventionSpec intervention_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    InterventionSpec spec;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "add") spec.kind = EditKind::add;
    else if (kind == "zero") spec.kind = EditKind::zero;
    else if (kind == "color") spec.kind = EditKind::color;
    else throw DataError("unknown intervention kind: " + kind);
    spec.layers = j.at("layers").get<std::vector<int>>();
    spec.positions = selector_from_json(j.at("selector"));
    spec.multiplier = j.at("multiplier").get<float>();
    if (j.contains("point")) {
        const std::string p = j.at("point").get<std::string>();
        if (p == "block_input") spec.point = CapturePoint::block_input;
        else if (p == "block_output") spec.point = CapturePoint::block_output;
        else throw DataError("unknown capture point: " + p);
    }
    spec.vector_ref = j.value("vector_ref", std::string{});
    return spec;
}

} // namespace residprobe
