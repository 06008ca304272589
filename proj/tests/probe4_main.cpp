// Scratch: per-layer steering effect on the signal chain. Not a test.
#include <cstdio>

#include "residprobe/model.hpp"
#include "residprobe/prompts.hpp"
#include "residprobe/synthetic.hpp"

using namespace residprobe;

int main() {
    PlantParams pp;
    auto planted = make_planted_model(pp);
    SyntheticDataParams dp;
    dp.n_records = 2;
    auto records = make_planted_dataset(dp);
    PromptInfo prompt = individual_prompt(records[0], ProbeAuthor::self, true);
    const int L = static_cast<int>(prompt.tokens.size());

    auto run = [&](int edit_layer, float mult) {
        std::vector<InterventionSpec> edits;
        if (edit_layer >= 0) {
            InterventionSpec e;
            e.kind = EditKind::add;
            e.layers = {edit_layer};
            e.positions = PositionSelector::at_offset(-2);
            e.direction = {planted.direction};
            e.multiplier = mult;
            edits.push_back(e);
        }
        CaptureSpec cap;
        cap.layers = {0, 1, 2, 3};
        cap.positions = PositionSelector::span(L - 2, L);
        auto fr = forward(planted.weights, prompt.tokens, cap, edits);
        const auto& dist = fr.dists.back();
        std::printf("edit L%d mult %+0.0f: logitY=%7.3f logitN=%7.3f argmax='%s' | x.u @L-2:",
                    edit_layer, mult, dist.logits[kTokYes], dist.logits[kTokNo],
                    Tokenizer::decode_token(dist.argmax()).c_str());
        for (int l = 0; l < 4; ++l) {
            double dot = 0;
            auto row = fr.tape->at(l, L - 2);
            for (int i = 0; i < 64; ++i) dot += row[i] * planted.direction[i];
            std::printf(" %6.2f", dot);
        }
        double dot_last = 0;
        auto row = fr.tape->at(3, L - 1);
        for (int i = 0; i < 64; ++i) dot_last += row[i] * planted.direction[i];
        std::printf(" | x.u @L-1 out: %6.2f\n", dot_last);
    };

    run(-1, 0);
    for (int layer = 0; layer < 4; ++layer) {
        run(layer, 8.0f);
        run(layer, -8.0f);
    }

    // Same again with a contaminated direction mimicking an imperfect
    // extraction: mix of u and the slot channels.
    std::vector<float> mixed(64, 0.0f);
    {
        DetRng mixrng(5);
        for (int i = 4; i < 16; ++i) mixed[i] = planted.direction[i] * 0.73f;
        double ss = 0;
        for (int i = 16; i < 32; ++i) mixed[i] = static_cast<float>(mixrng.next_normal());
        for (int i = 16; i < 32; ++i) ss += mixed[i] * mixed[i];
        const float scale = static_cast<float>(0.68 / std::sqrt(ss));
        for (int i = 16; i < 32; ++i) mixed[i] *= scale;
        vec_normalize(mixed);
    }
    std::printf("-- mixed direction (0.73 u + 0.68 slot-channel junk) --\n");
    auto run_mixed = [&](int edit_layer, float mult) {
        InterventionSpec e;
        e.kind = EditKind::add;
        e.layers = {edit_layer};
        e.positions = PositionSelector::at_offset(-2);
        e.direction = {mixed};
        e.multiplier = mult;
        auto fr = forward(planted.weights, prompt.tokens, std::nullopt, {e});
        const auto& dist = fr.dists.back();
        std::printf("edit L%d mult %+0.0f: logitY=%7.3f logitN=%7.3f logit1=%7.3f logit2=%7.3f\n",
                    edit_layer, mult, dist.logits[kTokYes], dist.logits[kTokNo],
                    dist.logits[kTokLabel1], dist.logits[kTokLabel2]);
    };
    for (int layer = 0; layer < 3; ++layer) {
        run_mixed(layer, 8.0f);
        run_mixed(layer, -8.0f);
    }
    return 0;
}
