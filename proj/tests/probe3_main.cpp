// Scratch: verify the raw-channel self-copy head. Not a test.
#include <cmath>
#include <cstdio>

#include "residprobe/model.hpp"
#include "residprobe/prompts.hpp"
#include "residprobe/synthetic.hpp"

using namespace residprobe;

int main() {
    PlantParams pp;
    auto planted = make_planted_model(pp);
    SyntheticDataParams dp;
    dp.n_records = 1;
    auto records = make_planted_dataset(dp);
    PromptInfo prompt = paired_prompt(records[0], PairOrdering::self_first, true);

    CaptureSpec cap;
    cap.layers = {0, 1};
    cap.positions = PositionSelector::all();
    auto fr = forward(planted.weights, prompt.tokens, cap);

    // Find a self-marker position inside text1.
    int marker_pos = -1;
    for (int p = prompt.text1_span.begin; p < prompt.text1_span.end; ++p)
        if (prompt.tokens[static_cast<size_t>(p)] == Tokenizer::byte_token('~')) {
            marker_pos = p;
            break;
        }
    std::printf("marker at %d (text1 %d..%d, len %zu)\n", marker_pos, prompt.text1_span.begin,
                prompt.text1_span.end, prompt.tokens.size());
    auto row = fr.tape->at(0, marker_pos);
    double raw = 0, unet = 0;
    for (int i = 35; i < 43; ++i) raw += row[i] * row[i];
    for (int i = 4; i < 16; ++i) unet += row[i] * row[i];
    std::printf("layer0 out at marker: |u|=%.4f |raw|=%.4f bias=%.3f\n", std::sqrt(unet),
                std::sqrt(raw), row[0]);
    // Recompute the layer-1 span-1 head by hand from the layer-0 output tape.
    const auto& cfg = planted.weights.config();
    const int d = cfg.d_model;
    const int L = static_cast<int>(prompt.tokens.size());
    const auto wq = planted.weights.span("l1.wq");
    const auto wk = planted.weights.span("l1.wk");
    const auto wv = planted.weights.span("l1.wv");
    const auto pos_emb = planted.weights.span("pos_emb");

    auto normed = [&](int pidx) {
        auto row = fr.tape->at(0, pidx);
        double ss = 0;
        for (int i = 0; i < d; ++i) ss += row[i] * row[i];
        const float inv = static_cast<float>(1.0 / std::sqrt(ss / d + cfg.norm_epsilon));
        std::vector<float> h(static_cast<size_t>(d));
        for (int i = 0; i < d; ++i) h[static_cast<size_t>(i)] = row[i] * inv;
        return h;
    };

    auto head_qk = [&](const std::vector<float>& h, int pidx, int col) {
        double q = 0;
        for (int i = 0; i < d; ++i)
            q += (h[static_cast<size_t>(i)] + pos_emb[static_cast<size_t>(pidx) * d + i]) *
                 wq[static_cast<size_t>(i) * d + col];
        return q;
    };
    auto head_k = [&](const std::vector<float>& h, int pidx, int col) {
        double k = 0;
        for (int i = 0; i < d; ++i)
            k += (h[static_cast<size_t>(i)] + pos_emb[static_cast<size_t>(pidx) * d + i]) *
                 wk[static_cast<size_t>(i) * d + col];
        return k;
    };

    auto hq = normed(L - 1);
    const double q0 = head_qk(hq, L - 1, 0);
    auto h_text1 = normed(marker_pos);
    auto h_text2 = normed((prompt.text2_span.begin + prompt.text2_span.end) / 2);
    auto h_scaffold = normed(L - 3);
    std::printf("span1 head: q(L-1)=%.3f k(text1 marker)=%.3f k(text2 mid)=%.3f k(scaffold)=%.3f\n",
                q0, head_k(h_text1, marker_pos, 0),
                head_k(h_text2, (prompt.text2_span.begin + prompt.text2_span.end) / 2, 0),
                head_k(h_scaffold, L - 3, 0));
    double v0 = 0;
    for (int i = 0; i < d; ++i) v0 += h_text1[static_cast<size_t>(i)] * wv[static_cast<size_t>(i) * d + 0];
    std::printf("span1 v at marker pos = %.3f (h.u = %.3f)\n", v0,
                [&] { double s = 0; for (int i = 0; i < d; ++i) s += h_text1[i] * planted.direction[i]; return s; }());
    return 0;
}
