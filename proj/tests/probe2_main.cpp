// Scratch: inspect answer-position logits of the planted model. Not a test.
#include <algorithm>
#include <cstdio>

#include "residprobe/model.hpp"
#include "residprobe/prompts.hpp"
#include "residprobe/synthetic.hpp"

using namespace residprobe;

int main() {
    PlantParams pp;
    auto planted = make_planted_model(pp);
    SyntheticDataParams dp;
    dp.n_records = 4;
    auto records = make_planted_dataset(dp);

    for (auto probe : {ProbeAuthor::self, ProbeAuthor::other}) {
        PromptInfo prompt = individual_prompt(records[0], probe, true);
        const int L = static_cast<int>(prompt.tokens.size());
        CaptureSpec cap;
        cap.layers = {0, 1, 2, 3};
        cap.positions = PositionSelector::span(L - 4, L);
        auto fr = forward(planted.weights, prompt.tokens, cap);
        const auto& dist = fr.dists.back();
        const int arg = dist.argmax();
        std::printf("%s: argmax=%d ('%s') logitY=%.3f logitN=%.3f logit_arg=%.3f\n",
                    probe == ProbeAuthor::self ? "self " : "other",
                    arg, Tokenizer::decode_token(arg).c_str(), dist.logits[kTokYes],
                    dist.logits[kTokNo], dist.logits[arg]);
        // u-projections along the tail positions, per layer.
        for (int l = 0; l < 4; ++l) {
            std::printf("  L%d u-proj:", l);
            for (int pos = L - 4; pos < L; ++pos) {
                double dot = 0;
                auto row = fr.tape->at(l, pos);
                for (int i = 0; i < 64; ++i) dot += row[i] * planted.direction[i];
                std::printf(" p[%d]=%.3f", pos - L, dot);
            }
            std::printf("\n");
        }
        // top 5 logits
        std::vector<int> idx(dist.logits.size());
        for (size_t i = 0; i < idx.size(); ++i) idx[i] = (int)i;
        std::sort(idx.begin(), idx.end(),
                  [&](int a, int b) { return dist.logits[a] > dist.logits[b]; });
        std::printf("  top5:");
        for (int i = 0; i < 5; ++i)
            std::printf(" %d('%s')=%.3f", idx[i], Tokenizer::decode_token(idx[i]).c_str(),
                        dist.logits[idx[i]]);
        std::printf("\n");
    }

    // Paired coloring of the other-written text, both orderings.
    for (auto ordering : {PairOrdering::self_first, PairOrdering::self_second}) {
        PromptInfo prompt = paired_prompt(records[0], ordering, true);
        const bool self_first = ordering == PairOrdering::self_first;
        TokenSpan other_span = self_first ? prompt.text2_span : prompt.text1_span;
        auto edits = color_span(std::vector<std::vector<float>>{planted.direction}, 4,
                                other_span.begin, other_span.end, 8.0f,
                                prompt.answer_position());
        auto base = forward(planted.weights, prompt.tokens);
        auto colored = forward(planted.weights, prompt.tokens, std::nullopt, edits);
        std::printf("paired %s colored=%s: base lp1=%.3f lp2=%.3f | colored lp1=%.3f lp2=%.3f\n",
                    self_first ? "self_first " : "self_second",
                    self_first ? "text2" : "text1", base.dists.back().log_probs[kTokLabel1],
                    base.dists.back().log_probs[kTokLabel2],
                    colored.dists.back().log_probs[kTokLabel1],
                    colored.dists.back().log_probs[kTokLabel2]);

        // Inspect the routing: region flags mid-text at layer-1 input, and
        // label channel content at the final position.
        const int L = static_cast<int>(prompt.tokens.size());
        CaptureSpec cap;
        cap.layers = {0, 1};
        cap.positions = PositionSelector::all();
        cap.point = CapturePoint::block_output;
        auto fr = forward(planted.weights, prompt.tokens, cap, edits);
        const int mid1 = (prompt.text1_span.begin + prompt.text1_span.end) / 2;
        const int mid2 = (prompt.text2_span.begin + prompt.text2_span.end) / 2;
        auto r0 = fr.tape->at(0, mid1);
        auto r0b = fr.tape->at(0, mid2);
        std::printf("  tags: text1 mid R1=%.3f R2=%.3f | text2 mid R1=%.3f R2=%.3f\n",
                    r0[33], r0[34], r0b[33], r0b[34]);
        auto last1 = fr.tape->at(1, L - 1);
        double pa = 0, pb = 0, base_pa = 0, base_pb = 0;
        CaptureSpec cap1 = cap;
        auto frb = forward(planted.weights, prompt.tokens, cap1);
        auto lastb = frb.tape->at(1, L - 1);
        for (int i = 16; i < 24; ++i) { pa += last1[i] * last1[i]; base_pa += lastb[i] * lastb[i]; }
        for (int i = 24; i < 32; ++i) { pb += last1[i] * last1[i]; base_pb += lastb[i] * lastb[i]; }
        std::printf("  |ua|: base=%.4f colored=%.4f  |ub|: base=%.4f colored=%.4f\n",
                    std::sqrt(base_pa), std::sqrt(pa), std::sqrt(base_pb), std::sqrt(pb));
    }
    return 0;
}
