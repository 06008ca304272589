#include "residprobe/contrast.hpp"

#include <algorithm>
#include <cmath>

namespace residprobe {

std::vector<ContrastPair> make_contrast_pairs(const std::vector<DatasetRecord>& records,
                                              bool include_context) {
    std::vector<ContrastPair> pairs;
    pairs.reserve(records.size());
    for (size_t i = 0; i < records.size(); ++i) {
        const auto& rec = records[i];
        ContrastPair p;
        p.source_id = rec.id;
        p.rotation = static_cast<int>(i % 4);
        p.self_is_b = (i % 2) == 0;
        const std::string context = include_context ? context_block(rec) : std::string{};
        TwoAfcPrompt self_prompt = build_2afc_prompt(context, rec.self_text, p.rotation, p.self_is_b);
        TwoAfcPrompt other_prompt =
            build_2afc_prompt(context, rec.other_text, p.rotation, p.self_is_b);
        p.prompt_self = std::move(self_prompt.info.tokens);
        p.prompt_other = std::move(other_prompt.info.tokens);
        p.correct_self = self_prompt.correct_token;
        p.correct_other = p.correct_self == kTokA ? kTokB : kTokA;
        pairs.push_back(std::move(p));
    }
    return pairs;
}

namespace {

bool judged_correct(const TokenDistribution& dist, int correct_token,
                    const std::optional<double>& confidence) {
    const int wrong_token = correct_token == kTokA ? kTokB : kTokA;
    const float lp_correct = dist.log_prob(correct_token);
    const float lp_wrong = dist.log_prob(wrong_token);
    if (!(lp_correct > lp_wrong)) return false;
    if (confidence && std::exp(static_cast<double>(lp_correct)) < *confidence) return false;
    return true;
}

} // namespace

std::vector<ContrastPair> screen_pairs(const WeightSet& w, const std::vector<ContrastPair>& pairs,
                                       const ScreenOptions& opts) {
    std::vector<char> keep(pairs.size(), 0);
    parallel_for(pairs.size(), opts.n_threads, [&](size_t i) {
        const auto& p = pairs[i];
        auto fr_self = forward(w, p.prompt_self);
        auto fr_other = forward(w, p.prompt_other);
        const bool self_ok =
            judged_correct(fr_self.dists.back(), p.correct_self, opts.confidence_threshold);
        const bool other_ok =
            judged_correct(fr_other.dists.back(), p.correct_other, opts.confidence_threshold);
        keep[i] = self_ok && other_ok ? 1 : 0;
    });
    std::vector<ContrastPair> kept;
    for (size_t i = 0; i < pairs.size(); ++i) {
        if (!keep[i]) continue;
        ContrastPair p = pairs[i];
        p.both_correct = true;
        kept.push_back(std::move(p));
    }
    return kept;
}

std::vector<SteeringVector> extract_vector(const WeightSet& w,
                                           const std::vector<ContrastPair>& pairs,
                                           const ExtractOptions& opts) {
    if (pairs.empty()) throw DataError("extract_vector: no pairs to harvest");
    if (opts.k_window < 1) throw UsageError("extract_vector: K must be >= 1");
    const ModelConfig& cfg = w.config();
    const int K = opts.k_window;
    const int L = cfg.n_layers;
    const int d = cfg.d_model;

    for (const auto& p : pairs) {
        if (static_cast<int>(p.prompt_self.size()) < K ||
            static_cast<int>(p.prompt_other.size()) < K)
            throw DataError("extract_vector: prompt for '" + p.source_id +
                            "' is shorter than K = " + std::to_string(K));
    }

    CaptureSpec capture;
    capture.layers.resize(static_cast<size_t>(L));
    for (int l = 0; l < L; ++l) capture.layers[static_cast<size_t>(l)] = l;
    capture.point = opts.point;

    // Per-pair slot activations land in preassigned slots; the reduction over
    // pairs below runs in index order, so results do not depend on the worker
    // count.
    const size_t per_pair = static_cast<size_t>(L) * K * d;
    std::vector<float> self_acts(pairs.size() * per_pair);
    std::vector<float> other_acts(pairs.size() * per_pair);

    parallel_for(pairs.size(), opts.n_threads, [&](size_t i) {
        const auto& p = pairs[i];
        for (int side = 0; side < 2; ++side) {
            const auto& prompt = side == 0 ? p.prompt_self : p.prompt_other;
            const int seq = static_cast<int>(prompt.size());
            CaptureSpec cap = capture;
            cap.positions = PositionSelector::span(seq - K, seq);
            auto fr = forward(w, prompt, cap);
            float* dst = (side == 0 ? self_acts.data() : other_acts.data()) + i * per_pair;
            for (int l = 0; l < L; ++l)
                for (int s = 0; s < K; ++s) {
                    auto src = fr.tape->at(l, seq - K + s);
                    std::copy(src.begin(), src.end(),
                              dst + (static_cast<size_t>(l) * K + s) * d);
                }
        }
    });

    std::vector<SteeringVector> slots(static_cast<size_t>(K));
    for (int s = 0; s < K; ++s) {
        SteeringVector v;
        v.n_layers = L;
        v.d_model = d;
        v.k_window = K;
        v.token_slot = s;
        v.provenance = opts.provenance;
        v.layers.assign(static_cast<size_t>(L), std::vector<float>(static_cast<size_t>(d)));
        v.pre_norm.assign(static_cast<size_t>(L), 0.0);
        slots[static_cast<size_t>(s)] = std::move(v);
    }

    std::vector<double> mean_diff(static_cast<size_t>(d));
    for (int l = 0; l < L; ++l) {
        for (int s = 0; s < K; ++s) {
            std::fill(mean_diff.begin(), mean_diff.end(), 0.0);
            for (size_t i = 0; i < pairs.size(); ++i) {
                const float* a = self_acts.data() + i * per_pair +
                                 (static_cast<size_t>(l) * K + s) * d;
                const float* b = other_acts.data() + i * per_pair +
                                 (static_cast<size_t>(l) * K + s) * d;
                for (int c = 0; c < d; ++c)
                    mean_diff[static_cast<size_t>(c)] +=
                        static_cast<double>(a[c]) - static_cast<double>(b[c]);
            }
            auto& out = slots[static_cast<size_t>(s)];
            auto& layer = out.layers[static_cast<size_t>(l)];
            double norm_sq = 0.0;
            for (int c = 0; c < d; ++c) {
                const double m = mean_diff[static_cast<size_t>(c)] / static_cast<double>(pairs.size());
                layer[static_cast<size_t>(c)] = static_cast<float>(m);
                norm_sq += m * m;
            }
            out.pre_norm[static_cast<size_t>(l)] = std::sqrt(norm_sq);
            vec_normalize(layer, l, s);
            out.normalized = true;
        }
    }
    return slots;
}

NuisanceOutcome extract_nuisance(const WeightSet& w, CapturePoint point, int n_threads) {
    const auto& battery = nuisance_battery();
    const ModelConfig& cfg = w.config();
    const int L = cfg.n_layers;
    const int d = cfg.d_model;

    struct PairDiff {
        std::vector<std::vector<float>> layers;
        bool usable = false;
    };
    std::vector<PairDiff> diffs(battery.size());

    parallel_for(battery.size(), n_threads, [&](size_t i) {
        const auto& pair = battery[i];
        PromptInfo first = nuisance_prompt(pair.first);
        PromptInfo second = nuisance_prompt(pair.second);

        CaptureSpec cap;
        cap.layers.resize(static_cast<size_t>(L));
        for (int l = 0; l < L; ++l) cap.layers[static_cast<size_t>(l)] = l;
        cap.point = point;

        auto run = [&](const PromptInfo& p) {
            CaptureSpec c = cap;
            c.positions = PositionSelector::at_offset(-2);
            return forward(w, p.tokens, c);
        };
        auto fa = run(first);
        auto fb = run(second);

        PairDiff diff;
        diff.layers.assign(static_cast<size_t>(L), std::vector<float>(static_cast<size_t>(d)));
        diff.usable = true;
        for (int l = 0; l < L; ++l) {
            auto a = fa.tape->at(l, static_cast<int>(first.tokens.size()) - 2);
            auto b = fb.tape->at(l, static_cast<int>(second.tokens.size()) - 2);
            auto& row = diff.layers[static_cast<size_t>(l)];
            for (int c = 0; c < d; ++c) row[static_cast<size_t>(c)] = a[c] - b[c];
            try {
                vec_normalize(row, l, static_cast<int>(i));
            } catch (const DegenerateVectorError&) {
                diff.usable = false;
            }
        }
        diffs[i] = std::move(diff);
    });

    NuisanceOutcome out;
    out.vector.n_layers = L;
    out.vector.d_model = d;
    out.vector.k_window = 2;
    out.vector.token_slot = 0;
    out.vector.provenance = "nuisance-battery";
    out.vector.layers.assign(static_cast<size_t>(L), std::vector<float>(static_cast<size_t>(d)));

    std::vector<std::vector<double>> acc(static_cast<size_t>(L),
                                         std::vector<double>(static_cast<size_t>(d), 0.0));
    for (const auto& diff : diffs) {
        if (!diff.usable) {
            ++out.pairs_skipped;
            continue;
        }
        ++out.pairs_used;
        for (int l = 0; l < L; ++l)
            for (int c = 0; c < d; ++c)
                acc[static_cast<size_t>(l)][static_cast<size_t>(c)] +=
                    diff.layers[static_cast<size_t>(l)][static_cast<size_t>(c)];
    }
    if (out.pairs_used == 0)
        throw DataError("extract_nuisance: every battery pair produced a degenerate difference");
    for (int l = 0; l < L; ++l) {
        auto& row = out.vector.layers[static_cast<size_t>(l)];
        for (int c = 0; c < d; ++c)
            row[static_cast<size_t>(c)] =
                static_cast<float>(acc[static_cast<size_t>(l)][static_cast<size_t>(c)] /
                                   out.pairs_used);
        vec_normalize(row, l, -1);
    }
    out.vector.normalized = true;
    return out;
}

LogitLensReadout logit_lens_decode(const WeightSet& w, const std::vector<float>& v, int top_k) {
    const ModelConfig& cfg = w.config();
    if (static_cast<int>(v.size()) != cfg.d_model)
        throw UsageError("logit_lens_decode: vector dimension mismatch");
    if (top_k < 1 || top_k > cfg.vocab_size)
        throw UsageError("logit_lens_decode: top_k must be in [1, vocab_size]");

    const auto norm_w = w.span("final_norm");
    const auto unembed = w.span("unembed");
    const int d = cfg.d_model;

    auto decode_one = [&](float sign) {
        // final_norm then unembed, matching the model's own readout path.
        std::vector<float> normed(static_cast<size_t>(d));
        double ss = 0.0;
        for (int i = 0; i < d; ++i) {
            const double x = static_cast<double>(sign) * v[static_cast<size_t>(i)];
            ss += x * x;
        }
        const float inv =
            static_cast<float>(1.0 / std::sqrt(ss / d + static_cast<double>(cfg.norm_epsilon)));
        for (int i = 0; i < d; ++i)
            normed[static_cast<size_t>(i)] =
                sign * v[static_cast<size_t>(i)] * inv * norm_w[static_cast<size_t>(i)];

        std::vector<DecodedToken> scored(static_cast<size_t>(cfg.vocab_size));
        for (int t = 0; t < cfg.vocab_size; ++t) {
            float s = 0.0f;
            for (int i = 0; i < d; ++i)
                s += normed[static_cast<size_t>(i)] *
                     unembed[static_cast<size_t>(i) * cfg.vocab_size + t];
            scored[static_cast<size_t>(t)] = DecodedToken{t, s};
        }
        std::stable_sort(scored.begin(), scored.end(), [](const DecodedToken& a, const DecodedToken& b) {
            if (a.score != b.score) return a.score > b.score;
            return a.token < b.token;
        });
        scored.resize(static_cast<size_t>(top_k));
        return scored;
    };

    LogitLensReadout out;
    out.positive = decode_one(1.0f);
    out.negative = decode_one(-1.0f);
    return out;
}

} // namespace residprobe
