#include "residprobe/model.hpp"

#include <algorithm>
#include <cmath>

#include "residprobe/tokenizer.hpp"

namespace residprobe {

int TokenDistribution::argmax() const {
    int best = 0;
    for (int t = 1; t < static_cast<int>(logits.size()); ++t)
        if (logits[static_cast<size_t>(t)] > logits[static_cast<size_t>(best)]) best = t;
    return best;
}

namespace {

size_t tape_index(const ResidualTape& tape, int layer, int position) {
    auto lit = std::find(tape.layers.begin(), tape.layers.end(), layer);
    auto pit = std::find(tape.positions.begin(), tape.positions.end(), position);
    if (lit == tape.layers.end() || pit == tape.positions.end())
        throw UsageError("tape: (layer " + std::to_string(layer) + ", position " +
                         std::to_string(position) + ") was not captured");
    const size_t li = static_cast<size_t>(lit - tape.layers.begin());
    const size_t pi = static_cast<size_t>(pit - tape.positions.begin());
    return (li * tape.positions.size() + pi) * static_cast<size_t>(tape.d_model);
}

} // namespace

std::span<const float> ResidualTape::at(int layer, int position) const {
    return std::span<const float>(values).subspan(tape_index(*this, layer, position),
                                                  static_cast<size_t>(d_model));
}

std::span<float> ResidualTape::at_mut(int layer, int position) {
    return std::span<float>(values).subspan(tape_index(*this, layer, position),
                                            static_cast<size_t>(d_model));
}

namespace {

// y[s] = rmsnorm(x[s]) * w, one row per position.
void rmsnorm_rows(const float* x, const float* w, float* y, int rows, int d, float eps) {
    for (int s = 0; s < rows; ++s) {
        const float* xs = x + static_cast<size_t>(s) * d;
        float* ys = y + static_cast<size_t>(s) * d;
        double ss = 0.0;
        for (int i = 0; i < d; ++i) ss += static_cast<double>(xs[i]) * xs[i];
        const float inv = static_cast<float>(1.0 / std::sqrt(ss / d + static_cast<double>(eps)));
        for (int i = 0; i < d; ++i) ys[i] = xs[i] * inv * w[i];
    }
}

// C[rows x out] = X[rows x in] * W[in x out], accumulating over W rows so the
// inner loop runs over contiguous memory.
void matmul(const float* x, const float* w, float* c, int rows, int in, int out) {
    for (int s = 0; s < rows; ++s) {
        const float* xs = x + static_cast<size_t>(s) * in;
        float* cs = c + static_cast<size_t>(s) * out;
        std::fill(cs, cs + out, 0.0f);
        for (int i = 0; i < in; ++i) {
            const float xi = xs[i];
            if (xi == 0.0f) continue;
            const float* wr = w + static_cast<size_t>(i) * out;
            for (int o = 0; o < out; ++o) cs[o] += xi * wr[o];
        }
    }
}

struct EditPlan {
    const InterventionSpec* spec;
    std::vector<int> positions;
};

// Edits grouped by (layer, point), in declaration order.
std::vector<std::vector<EditPlan>> plan_edits(const std::vector<InterventionSpec>& edits,
                                              const ModelConfig& cfg, int seq_len,
                                              CapturePoint point) {
    std::vector<std::vector<EditPlan>> by_layer(static_cast<size_t>(cfg.n_layers));
    for (const auto& e : edits) {
        if (e.point != point) continue;
        auto positions = resolve_positions(e.positions, seq_len);
        for (int l : e.layers) {
            if (l < 0 || l >= cfg.n_layers)
                throw UsageError("edit layer index out of range: " + std::to_string(l));
            by_layer[static_cast<size_t>(l)].push_back(EditPlan{&e, positions});
        }
    }
    return by_layer;
}

void run_edits(const std::vector<EditPlan>& plans, float* x, int d, int layer) {
    for (const auto& plan : plans) {
        const auto dir = plan.spec->direction_for_layer(layer);
        for (int p : plan.positions) {
            std::span<float> row(x + static_cast<size_t>(p) * d, static_cast<size_t>(d));
            switch (plan.spec->kind) {
                case EditKind::add:
                case EditKind::color:
                    apply_add(row, dir, plan.spec->multiplier);
                    break;
                case EditKind::zero:
                    apply_zero(row, dir);
                    break;
            }
        }
    }
}

} // namespace

ForwardResult forward(const WeightSet& w, std::span<const int> tokens,
                      const std::optional<CaptureSpec>& capture,
                      const std::vector<InterventionSpec>& edits) {
    const ModelConfig& cfg = w.config();
    const int seq = static_cast<int>(tokens.size());
    if (seq == 0) throw UsageError("forward: empty token sequence");
    if (seq > cfg.max_seq_len)
        throw DataError("forward: sequence too long (" + std::to_string(seq) + " > " +
                        std::to_string(cfg.max_seq_len) + ")");
    for (int t : tokens)
        if (!Tokenizer::is_valid(t, cfg.vocab_size))
            throw DataError("forward: token id out of range: " + std::to_string(t));

    const int d = cfg.d_model;
    const int dh = cfg.head_dim();
    const int ff = cfg.d_ff;
    const float scale = 1.0f / std::sqrt(static_cast<float>(dh));

    ForwardResult result;
    if (capture) {
        if (capture->layers.empty()) throw UsageError("capture: layer list must be non-empty");
        ResidualTape tape;
        tape.layers = capture->layers;
        for (int l : tape.layers)
            if (l < 0 || l >= cfg.n_layers)
                throw UsageError("capture layer index out of range: " + std::to_string(l));
        tape.positions = resolve_positions(capture->positions, seq);
        tape.point = capture->point;
        tape.d_model = d;
        tape.values.assign(tape.layers.size() * tape.positions.size() * static_cast<size_t>(d),
                           0.0f);
        result.tape = std::move(tape);
    }

    const auto input_edits = plan_edits(edits, cfg, seq, CapturePoint::block_input);
    const auto output_edits = plan_edits(edits, cfg, seq, CapturePoint::block_output);

    const float* tok_emb = w.span("tok_emb").data();
    const float* pos_emb = w.span("pos_emb").data();

    std::vector<float> x(static_cast<size_t>(seq) * d);
    for (int p = 0; p < seq; ++p)
        std::copy_n(tok_emb + static_cast<size_t>(tokens[static_cast<size_t>(p)]) * d, d,
                    x.data() + static_cast<size_t>(p) * d);

    std::vector<float> normed(static_cast<size_t>(seq) * d);
    std::vector<float> qk_in(static_cast<size_t>(seq) * d);
    std::vector<float> q(static_cast<size_t>(seq) * d);
    std::vector<float> k(static_cast<size_t>(seq) * d);
    std::vector<float> v(static_cast<size_t>(seq) * d);
    std::vector<float> attn(static_cast<size_t>(seq) * d);
    std::vector<float> attn_out(static_cast<size_t>(seq) * d);
    std::vector<float> gate(static_cast<size_t>(seq) * ff);
    std::vector<float> up(static_cast<size_t>(seq) * ff);
    std::vector<float> down(static_cast<size_t>(seq) * d);
    std::vector<float> weights_buf(static_cast<size_t>(seq));

    auto capture_layer = [&](int layer, CapturePoint point) {
        if (!result.tape || result.tape->point != point) return;
        auto& tape = *result.tape;
        auto lit = std::find(tape.layers.begin(), tape.layers.end(), layer);
        if (lit == tape.layers.end()) return;
        for (int p : tape.positions)
            std::copy_n(x.data() + static_cast<size_t>(p) * d, d,
                        tape.at_mut(layer, p).data());
    };

    for (int layer = 0; layer < cfg.n_layers; ++layer) {
        run_edits(input_edits[static_cast<size_t>(layer)], x.data(), d, layer);
        capture_layer(layer, CapturePoint::block_input);

        const std::string prefix = "l" + std::to_string(layer) + ".";
        rmsnorm_rows(x.data(), w.span(prefix + "attn_norm").data(), normed.data(), seq, d,
                     cfg.norm_epsilon);

        // Learned positions feed queries and keys only, never the residual.
        for (int p = 0; p < seq; ++p) {
            const float* n = normed.data() + static_cast<size_t>(p) * d;
            const float* pe = pos_emb + static_cast<size_t>(p) * d;
            float* qi = qk_in.data() + static_cast<size_t>(p) * d;
            for (int i = 0; i < d; ++i) qi[i] = n[i] + pe[i];
        }
        matmul(qk_in.data(), w.span(prefix + "wq").data(), q.data(), seq, d, d);
        matmul(qk_in.data(), w.span(prefix + "wk").data(), k.data(), seq, d, d);
        matmul(normed.data(), w.span(prefix + "wv").data(), v.data(), seq, d, d);

        for (int h = 0; h < cfg.n_heads; ++h) {
            const int off = h * dh;
            for (int t = 0; t < seq; ++t) {
                const float* qt = q.data() + static_cast<size_t>(t) * d + off;
                float max_score = -INFINITY;
                for (int j = 0; j <= t; ++j) {
                    const float* kj = k.data() + static_cast<size_t>(j) * d + off;
                    float s = 0.0f;
                    for (int i = 0; i < dh; ++i) s += qt[i] * kj[i];
                    s *= scale;
                    weights_buf[static_cast<size_t>(j)] = s;
                    max_score = std::max(max_score, s);
                }
                double denom = 0.0;
                for (int j = 0; j <= t; ++j) {
                    const double e = std::exp(static_cast<double>(
                        weights_buf[static_cast<size_t>(j)] - max_score));
                    weights_buf[static_cast<size_t>(j)] = static_cast<float>(e);
                    denom += e;
                }
                const float inv = static_cast<float>(1.0 / denom);
                float* at = attn.data() + static_cast<size_t>(t) * d + off;
                std::fill(at, at + dh, 0.0f);
                for (int j = 0; j <= t; ++j) {
                    const float wj = weights_buf[static_cast<size_t>(j)] * inv;
                    const float* vj = v.data() + static_cast<size_t>(j) * d + off;
                    for (int i = 0; i < dh; ++i) at[i] += wj * vj[i];
                }
            }
        }
        matmul(attn.data(), w.span(prefix + "wo").data(), attn_out.data(), seq, d, d);
        for (size_t i = 0; i < x.size(); ++i) x[i] += attn_out[i];

        rmsnorm_rows(x.data(), w.span(prefix + "mlp_norm").data(), normed.data(), seq, d,
                     cfg.norm_epsilon);
        matmul(normed.data(), w.span(prefix + "wg").data(), gate.data(), seq, d, ff);
        matmul(normed.data(), w.span(prefix + "wu").data(), up.data(), seq, d, ff);
        for (size_t i = 0; i < gate.size(); ++i) {
            const float g = gate[i];
            const float silu = g / (1.0f + std::exp(-g));
            gate[i] = silu * up[i];
        }
        matmul(gate.data(), w.span(prefix + "wd").data(), down.data(), seq, ff, d);
        for (size_t i = 0; i < x.size(); ++i) x[i] += down[i];

        run_edits(output_edits[static_cast<size_t>(layer)], x.data(), d, layer);
        capture_layer(layer, CapturePoint::block_output);
    }

    rmsnorm_rows(x.data(), w.span("final_norm").data(), normed.data(), seq, d, cfg.norm_epsilon);
    const float* unembed = w.span("unembed").data();
    result.dists.resize(static_cast<size_t>(seq));
    std::vector<float> logits_row(static_cast<size_t>(cfg.vocab_size));
    for (int p = 0; p < seq; ++p) {
        matmul(normed.data() + static_cast<size_t>(p) * d, unembed, logits_row.data(), 1, d,
               cfg.vocab_size);
        auto& dist = result.dists[static_cast<size_t>(p)];
        dist.logits = logits_row;
        dist.log_probs.resize(logits_row.size());
        double max_logit = -INFINITY;
        for (float l : logits_row) max_logit = std::max(max_logit, static_cast<double>(l));
        double sum = 0.0;
        for (float l : logits_row) sum += std::exp(static_cast<double>(l) - max_logit);
        const double lse = max_logit + std::log(sum);
        for (size_t i = 0; i < logits_row.size(); ++i)
            dist.log_probs[i] = static_cast<float>(static_cast<double>(logits_row[i]) - lse);
    }
    return result;
}

std::vector<int> generate(const WeightSet& w, std::span<const int> prompt,
                          const GenerateOptions& opts,
                          const std::vector<InterventionSpec>& edits) {
    if (prompt.empty()) throw UsageError("generate: empty prompt");
    if (opts.max_new < 1) throw UsageError("generate: max_new must be >= 1");

    std::vector<int> seq(prompt.begin(), prompt.end());
    std::vector<int> out;
    DetRng rng(opts.seed);
    for (int step = 0; step < opts.max_new; ++step) {
        if (static_cast<int>(seq.size()) >= w.config().max_seq_len) break;
        auto fr = forward(w, seq, std::nullopt, edits);
        const auto& dist = fr.dists.back();
        int next;
        if (opts.temperature <= 0.0f) {
            next = dist.argmax();
        } else {
            // Inverse-CDF sample of softmax(logits / temperature).
            const double inv_t = 1.0 / static_cast<double>(opts.temperature);
            double max_l = -INFINITY;
            for (float l : dist.logits) max_l = std::max(max_l, static_cast<double>(l) * inv_t);
            std::vector<double> p(dist.logits.size());
            double sum = 0.0;
            for (size_t i = 0; i < p.size(); ++i) {
                p[i] = std::exp(static_cast<double>(dist.logits[i]) * inv_t - max_l);
                sum += p[i];
            }
            const double u = rng.next_uniform() * sum;
            double acc = 0.0;
            next = static_cast<int>(p.size()) - 1;
            for (size_t i = 0; i < p.size(); ++i) {
                acc += p[i];
                if (u < acc) {
                    next = static_cast<int>(i);
                    break;
                }
            }
        }
        seq.push_back(next);
        out.push_back(next);
        if (opts.stop_at_eot && next == TOK_EOT) break;
    }
    return out;
}

SequenceLogProb sequence_log_prob(const WeightSet& w, std::span<const int> tokens) {
    if (tokens.size() < 2)
        throw UsageError("sequence_log_prob: need at least 2 tokens");
    auto fr = forward(w, tokens);
    SequenceLogProb out;
    out.log_probs.reserve(tokens.size() - 1);
    double total = 0.0;
    for (size_t t = 1; t < tokens.size(); ++t) {
        const float lp = fr.dists[t - 1].log_prob(tokens[t]);
        out.log_probs.push_back(lp);
        total += lp;
    }
    out.perplexity = std::exp(-total / static_cast<double>(out.log_probs.size()));
    return out;
}

} // namespace residprobe
