#include "residprobe/synthetic.hpp"

#include <cmath>
#include <cstdio>

#include "residprobe/intervene.hpp"
#include "residprobe/prompts.hpp"
#include "residprobe/tokenizer.hpp"

namespace residprobe {

namespace {

// Reserved coordinates of the hand-built model.
constexpr int kBiasCoord = 0;  // constant on every token
constexpr int kPosCoord = 1;   // position ramp (pos_emb only)
constexpr int kDigit1Coord = 2; // flag on the "1" byte embedding
constexpr int kFlagCoord = 3;   // flag on the role-assistant embedding
constexpr int kUNetBegin = 4;   // planted style direction u
constexpr int kUNetEnd = 16;
constexpr int kUABegin = 16; // span-1 aggregate channel
constexpr int kUAEnd = 24;
constexpr int kUBBegin = 24; // span-2 aggregate channel
constexpr int kUBEnd = 32;
constexpr int kDigit2Coord = 32; // flag on the "2" byte embedding
constexpr int kRegion1Coord = 33; // written by the region tagger
constexpr int kRegion2Coord = 34;
constexpr int kNoiseBegin = 35; // token-identity noise
constexpr int kNoiseEnd = 64;

std::vector<Tensor> zero_tensors(const ModelConfig& cfg) {
    std::vector<Tensor> tensors;
    for (const auto& [name, shape] : WeightSet::manifest(cfg)) {
        Tensor t;
        t.name = name;
        t.shape = shape;
        size_t n = 1;
        for (int d : shape) n *= static_cast<size_t>(d);
        const bool is_norm = name.find("norm") != std::string::npos;
        t.data.assign(n, is_norm ? 1.0f : 0.0f);
        tensors.push_back(std::move(t));
    }
    return tensors;
}

ModelConfig plant_config(const PlantParams& p) {
    ModelConfig cfg;
    cfg.n_layers = p.n_layers;
    cfg.d_model = p.d_model;
    cfg.n_heads = p.n_heads;
    cfg.d_ff = p.d_ff;
    cfg.vocab_size = kMinVocab;
    cfg.max_seq_len = p.max_seq_len;
    cfg.norm_epsilon = 1e-5f;
    cfg.seed = p.seed;
    return cfg;
}

std::vector<float> span_direction(DetRng& rng, int d, int begin, int end) {
    std::vector<float> v(static_cast<size_t>(d), 0.0f);
    for (int i = begin; i < end; ++i)
        v[static_cast<size_t>(i)] = static_cast<float>(rng.next_normal());
    vec_normalize(v);
    return v;
}

} // namespace

PlantedModel make_planted_model(const PlantParams& p) {
    if (p.d_model < kNoiseEnd)
        throw UsageError("planted model needs d_model >= 64 for its coordinate layout");
    if (p.n_layers < 4) throw UsageError("planted model needs at least 4 layers");
    if (p.n_heads < 4) throw UsageError("planted model needs 4 heads");
    if (p.d_model % p.n_heads != 0) throw UsageError("planted model: invalid head split");
    const ModelConfig cfg = plant_config(p);
    const int d = cfg.d_model;
    const int dh = cfg.head_dim();
    if (dh < 2) throw UsageError("planted model: head dim too small");

    DetRng rng(p.seed);
    std::vector<float> u = span_direction(rng, d, kUNetBegin, kUNetEnd);
    std::vector<float> ua = span_direction(rng, d, kUABegin, kUAEnd);
    std::vector<float> ub = span_direction(rng, d, kUBBegin, kUBEnd);

    auto tensors = zero_tensors(cfg);
    WeightSet w(cfg, std::move(tensors));

    // Embeddings: bias everywhere, identity noise, routing flags, markers.
    auto& emb = w.tensor("tok_emb").data;
    for (int tok = 0; tok < cfg.vocab_size; ++tok) {
        float* row = emb.data() + static_cast<size_t>(tok) * d;
        row[kBiasCoord] = p.bias_value;
        for (int c = kNoiseBegin; c < kNoiseEnd; ++c)
            row[c] = static_cast<float>(rng.next_normal()) * p.noise_sigma;
    }
    emb[static_cast<size_t>(TOK_ROLE_ASSISTANT) * d + kFlagCoord] = p.flag_value;
    emb[static_cast<size_t>(Tokenizer::byte_token('1')) * d + kDigit1Coord] = p.flag_value;
    emb[static_cast<size_t>(Tokenizer::byte_token('2')) * d + kDigit2Coord] = p.flag_value;
    {
        float* self_row =
            emb.data() + static_cast<size_t>(Tokenizer::byte_token(
                             static_cast<unsigned char>(p.self_marker))) * d;
        float* other_row =
            emb.data() + static_cast<size_t>(Tokenizer::byte_token(
                             static_cast<unsigned char>(p.other_marker))) * d;
        for (int i = 0; i < d; ++i) {
            self_row[i] += p.marker_strength * u[static_cast<size_t>(i)];
            other_row[i] -= p.marker_strength * u[static_cast<size_t>(i)];
        }
    }

    // Position ramp feeding the recency and tagger keys.
    auto& pos = w.tensor("pos_emb").data;
    for (int pidx = 0; pidx < cfg.max_seq_len; ++pidx)
        pos[static_cast<size_t>(pidx) * d + kPosCoord] =
            static_cast<float>(pidx) / static_cast<float>(cfg.max_seq_len);

    const std::string l0 = "l" + std::to_string(p.copy_layer) + ".";
    const std::string l1 = "l" + std::to_string(p.copy_layer + 1) + ".";
    const std::string lf = "l" + std::to_string(p.forward_layer()) + ".";

    // Layer 0 heads:
    //   head 1  uniform diffusion of byte-identity noise
    //   head 2  region tagger: attends the latest visible digit token and
    //           writes which of "1"/"2" it was
    {
        auto& wq = w.tensor(l0 + "wq").data;
        auto& wk = w.tensor(l0 + "wk").data;
        auto& wv = w.tensor(l0 + "wv").data;
        auto& wo = w.tensor(l0 + "wo").data;

        const int h1 = dh;
        for (int s = 0; s < kNoiseEnd - kNoiseBegin; ++s) {
            const int col = h1 + (s % dh);
            const float sign = (s % 2 == 0) ? 1.0f : -1.0f;
            wv[static_cast<size_t>(kNoiseBegin + s) * d + col] += sign * p.diff_v;
        }
        for (int r = 0; r < dh; ++r) {
            wo[static_cast<size_t>(h1 + r) * d + (kNoiseBegin + (r % (kNoiseEnd - kNoiseBegin)))] =
                p.diff_o;
            wo[static_cast<size_t>(h1 + r) * d +
               (kNoiseBegin + ((r + 5) % (kNoiseEnd - kNoiseBegin)))] = -0.7f * p.diff_o;
        }

        const int h2 = 2 * dh;
        wq[static_cast<size_t>(kBiasCoord) * d + h2] = p.tag_q;
        // Digit keys dominate; among digits, the position ramp makes the
        // latest one win.
        wk[static_cast<size_t>(kDigit1Coord) * d + h2] = p.tag_k;
        wk[static_cast<size_t>(kDigit2Coord) * d + h2] = p.tag_k;
        wk[static_cast<size_t>(kPosCoord) * d + h2] = p.tag_slope;
        wv[static_cast<size_t>(kDigit1Coord) * d + h2] = p.tag_v;
        wv[static_cast<size_t>(kDigit2Coord) * d + h2 + 1] = p.tag_v;
        wo[static_cast<size_t>(h2) * d + kRegion1Coord] = p.tag_o;
        wo[static_cast<size_t>(h2 + 1) * d + kRegion2Coord] = p.tag_o;
    }

    // Layer 1 heads, all reading the still-unmixed style content of the
    // layer input:
    //   head 0/1  span aggregators keyed on the region flags, pooling each
    //             labeled text into its own channel
    //   head 2    recency-weighted accumulation of prefix style into u
    {
        auto& wq = w.tensor(l1 + "wq").data;
        auto& wk = w.tensor(l1 + "wk").data;
        auto& wv = w.tensor(l1 + "wv").data;
        auto& wo = w.tensor(l1 + "wo").data;
        wq[static_cast<size_t>(kBiasCoord) * d + 0] = p.slot_q;
        wk[static_cast<size_t>(kRegion1Coord) * d + 0] = p.slot_k;
        wq[static_cast<size_t>(kBiasCoord) * d + dh] = p.slot_q;
        wk[static_cast<size_t>(kRegion2Coord) * d + dh] = p.slot_k;
        for (int i = 0; i < d; ++i) {
            wv[static_cast<size_t>(i) * d + 0] = p.slot_v * u[static_cast<size_t>(i)];
            wv[static_cast<size_t>(i) * d + dh] = p.slot_v * u[static_cast<size_t>(i)];
            wo[0 * static_cast<size_t>(d) + i] = p.slot_o * ua[static_cast<size_t>(i)];
            wo[static_cast<size_t>(dh) * d + i] = p.slot_o * ub[static_cast<size_t>(i)];
        }
        const int h2 = 2 * dh;
        wq[static_cast<size_t>(kBiasCoord) * d + h2] = p.copy_q;
        wk[static_cast<size_t>(kPosCoord) * d + h2] = p.copy_k;
        for (int i = 0; i < d; ++i) {
            wv[static_cast<size_t>(i) * d + h2] = p.copy_v * u[static_cast<size_t>(i)];
            wo[static_cast<size_t>(h2) * d + i] = p.copy_o * u[static_cast<size_t>(i)];
        }
    }

    // Forwarder head: routes the pre-answer token's u-content to the
    // positions that read it (keys fire on the role-assistant flag).
    {
        auto& wq = w.tensor(lf + "wq").data;
        auto& wk = w.tensor(lf + "wk").data;
        auto& wv = w.tensor(lf + "wv").data;
        auto& wo = w.tensor(lf + "wo").data;
        wq[static_cast<size_t>(kBiasCoord) * d + 0] = p.fwd_q;
        wk[static_cast<size_t>(kFlagCoord) * d + 0] = p.fwd_k;
        for (int i = 0; i < d; ++i) {
            wv[static_cast<size_t>(i) * d + 0] = p.fwd_v * u[static_cast<size_t>(i)];
            wo[0 * static_cast<size_t>(d) + i] = p.fwd_o * u[static_cast<size_t>(i)];
        }
    }

    // Readout. Yes/No contrast along u with a lean toward No at zero signal.
    // The A/B and 1/2 columns read smaller projections and carry a handicap
    // so the argmax on yes/no prompts stays inside {Y, N}; their pairwise
    // order is what the paired and 2AFC paradigms compare.
    {
        auto& un = w.tensor("unembed").data;
        const int V = cfg.vocab_size;
        DetRng urng(p.seed ^ 0x9e3779b97f4a7c15ULL);
        for (int tok = 0; tok < V; ++tok)
            for (int c = kNoiseBegin; c < kNoiseEnd; ++c)
                un[static_cast<size_t>(c) * V + tok] =
                    static_cast<float>(urng.next_normal()) * p.unembed_noise;

        auto clear_col = [&](int tok) {
            for (int c = 0; c < d; ++c) un[static_cast<size_t>(c) * V + tok] = 0.0f;
        };
        auto add_dir = [&](int tok, const std::vector<float>& dir, float gain) {
            for (int i = 0; i < d; ++i)
                un[static_cast<size_t>(i) * V + tok] += gain * dir[static_cast<size_t>(i)];
        };
        auto add_bias = [&](int tok, float bias) {
            un[static_cast<size_t>(kBiasCoord) * V + tok] += bias;
        };

        clear_col(kTokYes);
        add_dir(kTokYes, u, p.read_beta);
        add_bias(kTokYes, p.yes_bias);
        clear_col(kTokNo);
        add_dir(kTokNo, u, -p.read_beta);
        add_bias(kTokNo, p.no_bias);

        const float pair_beta = p.pair_beta_frac * p.read_beta;
        clear_col(kTokB);
        add_dir(kTokB, u, pair_beta);
        add_bias(kTokB, -p.pair_handicap);
        clear_col(kTokA);
        add_dir(kTokA, u, -pair_beta);
        add_bias(kTokA, -p.pair_handicap);

        clear_col(kTokLabel1);
        add_dir(kTokLabel1, ua, pair_beta);
        add_dir(kTokLabel1, ub, -pair_beta);
        add_bias(kTokLabel1, -p.pair_handicap);
        clear_col(kTokLabel2);
        add_dir(kTokLabel2, ub, pair_beta);
        add_dir(kTokLabel2, ua, -pair_beta);
        add_bias(kTokLabel2, -p.pair_handicap);
    }

    PlantedModel out{std::move(w), std::move(u), p};
    return out;
}

namespace {

const std::vector<std::string>& lexicon() {
    static const std::vector<std::string> words = {
        "the",    "garden", "quiet",  "river",  "note",   "walked", "morning", "coffee",
        "friend", "small",  "bright", "road",   "letter", "spring", "evening", "market",
        "stone",  "cloud",  "gentle", "window", "paper",  "autumn", "harbor",  "meadow",
        "simple", "warm",   "light",  "path",   "corner", "field",  "song",    "early",
    };
    return words;
}

std::string styled_text(DetRng& rng, int target_chars, char marker, double marker_density,
                        char cross_marker, double cross_density) {
    const auto& words = lexicon();
    std::string out;
    while (static_cast<int>(out.size()) < target_chars) {
        const auto& word = words[static_cast<size_t>(rng.next_u64() % words.size())];
        for (char ch : word) {
            out.push_back(ch);
            if (rng.next_uniform() < marker_density) out.push_back(marker);
            if (rng.next_uniform() < cross_density) out.push_back(cross_marker);
        }
        out.push_back(' ');
    }
    out.resize(static_cast<size_t>(target_chars));
    return out;
}

} // namespace

std::vector<DatasetRecord> make_planted_dataset(const SyntheticDataParams& p) {
    if (p.n_records < 1) throw UsageError("make_planted_dataset: need n_records >= 1");
    DetRng rng(p.seed);
    PlantParams defaults;
    std::vector<DatasetRecord> out;
    out.reserve(static_cast<size_t>(p.n_records));
    for (int i = 0; i < p.n_records; ++i) {
        const double density =
            p.marker_density_lo + rng.next_uniform() * (p.marker_density_hi - p.marker_density_lo);
        const double cross = rng.next_uniform() * p.cross_density_hi;
        DatasetRecord r;
        char idbuf[32];
        std::snprintf(idbuf, sizeof(idbuf), "syn-%04d", i);
        r.id = idbuf;
        r.dataset = p.dataset_name;
        r.instructions = "Write a short, friendly note about your day.";
        r.self_text = styled_text(rng, p.text_chars, defaults.self_marker, density,
                                  defaults.other_marker, cross);
        r.other_text = styled_text(rng, p.text_chars, defaults.other_marker, density,
                                   defaults.self_marker, cross);
        r.other_author = "human";
        out.push_back(std::move(r));
    }
    return out;
}

WeightSet make_label_bias_stub(const ModelConfig& cfg, int preferred_token) {
    if (!Tokenizer::is_valid(preferred_token, cfg.vocab_size))
        throw UsageError("label bias stub: preferred token out of range");
    auto tensors = zero_tensors(cfg);
    WeightSet w(cfg, std::move(tensors));
    auto& emb = w.tensor("tok_emb").data;
    for (int tok = 0; tok < cfg.vocab_size; ++tok)
        emb[static_cast<size_t>(tok) * cfg.d_model + kBiasCoord] = 0.5f;
    auto& un = w.tensor("unembed").data;
    un[static_cast<size_t>(kBiasCoord) * cfg.vocab_size + preferred_token] = 1.0f;
    return w;
}

} // namespace residprobe
