#pragma once

#include <string>
#include <vector>

#include "residprobe/common.hpp"

namespace residprobe {

// Per-layer direction with provenance. One instance covers one token slot of
// the contrastive capture window (slot k_window-2 is the canonical one, the
// final token before the model's response).
struct SteeringVector {
    int n_layers = 0;
    int d_model = 0;
    int k_window = 0;   // size of the capture window it came from
    int token_slot = 0; // which of the final k_window slots
    bool normalized = false;
    std::string provenance;
    std::vector<std::vector<float>> layers; // [n_layers][d_model]

    // Mean-difference norms before unit normalization, kept for reporting.
    std::vector<double> pre_norm;

    bool is_primary() const { return token_slot == k_window - 2; }
    const std::vector<float>& layer(int l) const { return layers.at(static_cast<size_t>(l)); }
};

using NuisanceVector = SteeringVector;

// Vector file: magic "SRV1", u32le header length, JSON header
// {n_layers, d_model, K, token_slot, normalized, provenance},
// packed f32le per-layer arrays.
void save_vector(const SteeringVector& v, const std::string& path);
SteeringVector load_vector(const std::string& path);

double cosine_similarity(const std::vector<float>& a, const std::vector<float>& b);
double cosine_similarity(const SteeringVector& a, const SteeringVector& b, int layer);

// v - (v.n)n per layer, renormalized. Degenerate when v is parallel to n.
SteeringVector project_out_nuisance(const SteeringVector& v, const NuisanceVector& n);

// Normalized per-layer mean of two vectors (for cross-dataset inspection).
SteeringVector average_vectors(const SteeringVector& a, const SteeringVector& b);

} // namespace residprobe
