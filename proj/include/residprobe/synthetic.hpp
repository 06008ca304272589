#pragma once

#include "residprobe/dataset.hpp"
#include "residprobe/weights.hpp"

namespace residprobe {

// Hand-built model with a known "style" direction planted in its residual
// stream, used to verify the extraction/steering/zeroing/coloring pipeline
// end to end.
//
// Mechanics: a marker byte injects +c*u (self style) or -c*u (other style)
// into the embedding. A first-layer tagger head marks every position with
// the latest "1"/"2" label it follows. The second layer reads the
// still-unmixed style content of its input three ways: span aggregators pool
// each labeled text's u-content into its own channel for the paired labels,
// and a recency-weighted head accumulates the net prefix style into u
// itself. A head at `forward_layer` routes the accumulated signal from the
// pre-answer token (the role-assistant position, offset -2) to the read
// position, and the unembedding maps these channels onto the Yes/No, A/B and
// 1/2 answer tokens. The layer in between is identity, so edits at
// `planted_layer()` act directly on the value the readout consumes.
struct PlantParams {
    uint64_t seed = 1234;
    int n_layers = 4;
    int d_model = 64;
    int n_heads = 4;
    int d_ff = 64;
    int max_seq_len = 768;

    float bias_value = 0.5f;      // coordinate 0, present on every token
    float flag_value = 1.0f;      // coordinate 3, role-assistant only
    float marker_strength = 0.8f; // +/- c on the planted direction
    float noise_sigma = 0.05f;    // token-identity noise, coords 32..63

    float copy_q = 1.0f; // recency head: bias -> query
    float copy_k = 4.5f; //               position -> key
    float copy_v = 1.0f; //               u readout
    float copy_o = 2.4f; //               u write-back

    float diff_v = 0.5f; // diffusion head moving byte-identity noise around
    float diff_o = 0.5f;

    float tag_q = 1.0f;  // region tagger: latest digit token -> region flag
    float tag_k = 5.0f;
    float tag_slope = 100.0f;
    float tag_v = 0.4f;
    float tag_o = 0.35f;

    float slot_q = 1.0f; // span aggregators keyed on the region flags
    float slot_k = 0.35f;
    float slot_v = 1.0f;
    float slot_o = 0.25f;

    float fwd_q = 1.0f; // forwarder head: bias -> query
    float fwd_k = 12.0f; //                 assistant flag -> key
    float fwd_v = 1.0f;
    float fwd_o = 1.2f;

    float read_beta = 0.8f;     // u weight on the Yes/No unembed columns
    float yes_bias = -0.9f;    // bias-coordinate weight on "Y"
    float no_bias = 0.9f;      // and on "N": no signal leans No
    float pair_beta_frac = 0.5f; // A/B and 1/2 read at this fraction of beta
    float pair_handicap = 0.55f; // keeps label argmax inside {Y, N}
    float unembed_noise = 0.02f;

    int copy_layer = 0;
    int forward_layer() const { return n_layers - 1; }
    int planted_layer() const { return n_layers - 2; }

    char self_marker = '~';
    char other_marker = '^';
};

struct PlantedModel {
    WeightSet weights;
    std::vector<float> direction; // the planted unit direction u
    PlantParams params;
};

PlantedModel make_planted_model(const PlantParams& params = {});

struct SyntheticDataParams {
    uint64_t seed = 99;
    int n_records = 40;
    int text_chars = 160;
    double marker_density_lo = 0.05; // per-character marker rate, drawn per record
    double marker_density_hi = 0.25;
    double cross_density_hi = 0.06; // opposite-style markers mixed in
    std::string dataset_name = "synthetic";
};

// Marker-styled text pairs readable by the planted model: self texts carry
// the self marker, other texts the other marker.
std::vector<DatasetRecord> make_planted_dataset(const SyntheticDataParams& params = {});

// Zero model that always prefers one answer token regardless of content.
// Useful as the position-only stub: in the paired paradigm it scores exactly
// 0.5 under counterbalancing.
WeightSet make_label_bias_stub(const ModelConfig& cfg, int preferred_token);

} // namespace residprobe
