// Scratch harness for tuning the planted-model constants. Not a test.
#include <cstdio>

#include "residprobe/analysis.hpp"
#include "residprobe/contrast.hpp"
#include "residprobe/synthetic.hpp"

using namespace residprobe;

int main() {
    PlantParams pp;
    auto planted = make_planted_model(pp);
    SyntheticDataParams dp;
    dp.n_records = 40;
    auto records = make_planted_dataset(dp);

    RunOptions ro;
    ro.n_threads = 8;

    auto [trials, report] = run_individual(planted.weights, records, ro);
    std::printf("individual: acc=%.3f p=%.4g claim_self=%.3f claim_other=%.3f degen=%d\n",
                report.accuracy, report.p_value, report.claim_rate_self, report.claim_rate_other,
                report.degenerate);

    auto [ptrials, preport] = run_paired(planted.weights, records, ro);
    std::printf("paired: acc=%.3f p=%.4g ties=%d\n", preport.accuracy, preport.p_value,
                preport.ties);

    auto pairs = make_contrast_pairs(records, true);
    ScreenOptions so;
    so.n_threads = 8;
    auto kept = screen_pairs(planted.weights, pairs, so);
    std::printf("screening: kept %zu / %zu\n", kept.size(), pairs.size());
    if (kept.empty()) return 1;

    ExtractOptions eo;
    eo.n_threads = 8;
    auto slots = extract_vector(planted.weights, kept, eo);
    const auto& primary = slots[static_cast<size_t>(eo.k_window - 2)];
    for (int l = 0; l < primary.n_layers; ++l) {
        double cos = cosine_similarity(primary.layer(l), planted.direction);
        std::printf("  layer %d: cos(primary, u)=%.4f pre_norm=%.5f\n", l, cos,
                    primary.pre_norm[static_cast<size_t>(l)]);
    }

    auto nuis = extract_nuisance(planted.weights, CapturePoint::block_output, 8);
    std::printf("nuisance: used=%d skipped=%d\n", nuis.pairs_used, nuis.pairs_skipped);
    for (int l = 0; l < nuis.vector.n_layers; ++l)
        std::printf("  layer %d: |cos(nuisance, u)|=%.4f\n", l,
                    std::abs(cosine_similarity(nuis.vector.layer(l), planted.direction)));

    auto projected = project_out_nuisance(primary, nuis.vector);
    std::printf("after out-projection: cos(primary, u) at planted layer = %.4f\n",
                cosine_similarity(projected.layer(pp.planted_layer()), planted.direction));

    SweepOptions sw;
    sw.n_threads = 8;
    auto grid = steering_sweep(planted.weights, projected, {0, 1, 2, 3}, {0, 1, 2, 4, 8}, records,
                               Paradigm::individual, sw);
    std::printf("baseline rates: cs=%.3f co=%.3f ds=%.3f do=%.3f\n", grid.baseline.claim_self,
                grid.baseline.claim_other, grid.baseline.deny_self, grid.baseline.deny_other);
    for (size_t li = 0; li < grid.layers.size(); ++li) {
        std::printf("  L%d:", grid.layers[li]);
        for (size_t mi = 0; mi < grid.multipliers.size(); ++mi) {
            const auto& c = grid.cell(li, mi);
            std::printf(" m%.0f[agg=%.1f cs=%.2f co=%.2f ds=%.2f do=%.2f]", grid.multipliers[mi],
                        c.aggregate, c.rates.claim_self, c.rates.claim_other, c.rates.deny_self,
                        c.rates.deny_other);
        }
        std::printf("\n");
    }

    auto zr = zeroing_run(planted.weights, projected, pp.planted_layer(), records, sw);
    std::printf("zeroing: base=%.3f zeroed=%.3f\n", zr.claim_base, zr.claim_zeroed);

    ColoringOptions co;
    co.kind = EditKind::add;
    co.multiplier = 8.0;
    co.target = ColorTarget::other;
    co.n_threads = 8;
    auto cr = coloring_run(planted.weights, projected, records, Paradigm::paired, co);
    std::printf("coloring paired (+4 on other text): choose_colored=%.3f flip=%.3f\n",
                cr.choose_colored_rate, cr.flip_rate);

    ColoringOptions ci;
    ci.kind = EditKind::add;
    ci.multiplier = 4.0;
    ci.target = ColorTarget::evaluated;
    ci.n_threads = 8;
    auto cri = coloring_run(planted.weights, projected, records, Paradigm::individual, ci);
    std::printf("coloring individual (+4): base acc=%.3f colored acc=%.3f pct_dec=%.1f\n",
                cri.baseline.accuracy, cri.colored.accuracy, cri.pct_decreasing);

    ColoringOptions cz;
    cz.kind = EditKind::zero;
    cz.target = ColorTarget::both;
    cz.n_threads = 8;
    auto crz = coloring_run(planted.weights, projected, records, Paradigm::paired, cz);
    std::printf("zero-coloring paired both: pct_dec=%.1f p=%.4g\n", crz.pct_decreasing,
                crz.p_value);
    return 0;
}
