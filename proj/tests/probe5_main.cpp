// Scratch: paired coloring multiplier scan. Not a test.
#include <cstdio>
#include "residprobe/analysis.hpp"
#include "residprobe/synthetic.hpp"
using namespace residprobe;
int main() {
    auto planted = make_planted_model({});
    SyntheticDataParams dp;
    dp.n_records = 40;
    auto records = make_planted_dataset(dp);
    for (double mult : {0.5, 1.0, 1.5, 2.0, 3.0, 4.0}) {
        ColoringOptions co;
        co.kind = EditKind::add;
        co.multiplier = mult;
        co.target = ColorTarget::other;
        co.n_threads = 8;
        SteeringVector vec;
        vec.n_layers = 4;
        vec.d_model = 64;
        vec.k_window = 10;
        vec.token_slot = 8;
        vec.normalized = true;
        vec.layers.assign(4, planted.direction);
        auto cr = coloring_run(planted.weights, vec, records, Paradigm::paired, co);
        std::printf("mult %.1f: choose_colored=%.3f flip=%.3f\n", mult, cr.choose_colored_rate,
                    cr.flip_rate);
    }
    return 0;
}
