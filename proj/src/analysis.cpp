#include "residprobe/analysis.hpp"

#include <algorithm>
#include <cmath>

namespace residprobe {

namespace {

// Trial-level claim/deny rates with the degenerate rule: an argmax outside
// the answer set counts as neither claiming nor denying.
ConditionRates rates_from_trials(const std::vector<TrialRecord>& trials, Paradigm paradigm) {
    ConditionRates r;
    int n_self = 0, n_other = 0, claims_self = 0, claims_other = 0, denies_self = 0,
        denies_other = 0;
    for (const auto& t : trials) {
        const bool claims = t.chosen_token == kTokYes;
        const bool denies = t.chosen_token == kTokNo;
        const bool is_self = paradigm == Paradigm::dummy || t.probed_author == ProbeAuthor::self;
        if (is_self) {
            ++n_self;
            claims_self += claims;
            denies_self += denies;
        }
        if (paradigm == Paradigm::dummy || t.probed_author == ProbeAuthor::other) {
            ++n_other;
            claims_other += claims;
            denies_other += denies;
        }
    }
    if (n_self > 0) {
        r.claim_self = static_cast<double>(claims_self) / n_self;
        r.deny_self = static_cast<double>(denies_self) / n_self;
    }
    if (n_other > 0) {
        r.claim_other = static_cast<double>(claims_other) / n_other;
        r.deny_other = static_cast<double>(denies_other) / n_other;
    }
    return r;
}

std::pair<std::vector<TrialRecord>, EvalReport> run_yes_no(const WeightSet& w,
                                                           const std::vector<DatasetRecord>& records,
                                                           Paradigm paradigm,
                                                           const RunOptions& opts) {
    if (paradigm == Paradigm::individual) return run_individual(w, records, opts);
    if (paradigm == Paradigm::dummy) return run_dummy(w, opts);
    throw UsageError("steering analysis requires a yes/no paradigm (individual or dummy)");
}

InterventionSpec steer_edit(const SteeringVector& vec, int layer, double multiplier, int offset,
                            CapturePoint point, EditKind kind) {
    InterventionSpec e;
    e.kind = kind;
    e.layers = {layer};
    e.positions = PositionSelector::at_offset(offset);
    e.direction = vec.layers;
    e.multiplier = static_cast<float>(multiplier);
    e.point = point;
    return e;
}

} // namespace

double aggregate_effectiveness(const ConditionRates& baseline, const ConditionRates& steered,
                               std::array<bool, 4>* saturated) {
    const double base[4] = {baseline.claim_self, baseline.claim_other, baseline.deny_self,
                            baseline.deny_other};
    const double steer[4] = {steered.claim_self, steered.claim_other, steered.deny_self,
                             steered.deny_other};
    double sum = 0.0;
    int defined = 0;
    for (int i = 0; i < 4; ++i) {
        if (base[i] >= 1.0) {
            if (saturated) (*saturated)[static_cast<size_t>(i)] = true;
            continue;
        }
        if (saturated) (*saturated)[static_cast<size_t>(i)] = false;
        sum += 100.0 * (steer[i] - base[i]) / (1.0 - base[i]);
        ++defined;
    }
    if (defined == 0) return 0.0;
    return sum / defined;
}

EffectivenessGrid steering_sweep(const WeightSet& w, const SteeringVector& vec,
                                 const std::vector<int>& layers,
                                 const std::vector<double>& multipliers,
                                 const std::vector<DatasetRecord>& records, Paradigm paradigm,
                                 const SweepOptions& opts) {
    if (layers.empty() || multipliers.empty())
        throw UsageError("steering_sweep: empty layer or multiplier list");
    for (int l : layers)
        if (l < 0 || l >= vec.n_layers)
            throw UsageError("steering_sweep: vector has no layer " + std::to_string(l));

    RunOptions base_opts;
    base_opts.include_context = opts.include_context;
    base_opts.n_threads = opts.n_threads;

    auto [base_trials, base_report] = run_yes_no(w, records, paradigm, base_opts);
    (void)base_report;

    EffectivenessGrid grid;
    grid.layers = layers;
    grid.multipliers = multipliers;
    grid.baseline = rates_from_trials(base_trials, paradigm);
    grid.cells.resize(layers.size() * multipliers.size());

    // Cells are independent; merge order is fixed by the (layer, multiplier)
    // index regardless of how the inner runs are threaded.
    for (size_t li = 0; li < layers.size(); ++li) {
        for (size_t mi = 0; mi < multipliers.size(); ++mi) {
            const int layer = layers[li];
            const double mult = multipliers[mi];

            RunOptions pos_opts = base_opts;
            pos_opts.edits = {steer_edit(vec, layer, mult, opts.steer_offset, opts.point,
                                         EditKind::add)};
            auto [pos_trials, pos_report] = run_yes_no(w, records, paradigm, pos_opts);

            RunOptions neg_opts = base_opts;
            neg_opts.edits = {steer_edit(vec, layer, -mult, opts.steer_offset, opts.point,
                                         EditKind::add)};
            auto [neg_trials, neg_report] = run_yes_no(w, records, paradigm, neg_opts);

            GridCell cell;
            const ConditionRates pos_rates = rates_from_trials(pos_trials, paradigm);
            const ConditionRates neg_rates = rates_from_trials(neg_trials, paradigm);
            cell.rates.claim_self = pos_rates.claim_self;
            cell.rates.claim_other = pos_rates.claim_other;
            cell.rates.deny_self = neg_rates.deny_self;
            cell.rates.deny_other = neg_rates.deny_other;
            cell.degenerate = pos_report.degenerate + neg_report.degenerate;
            cell.aggregate = aggregate_effectiveness(grid.baseline, cell.rates, &cell.saturated);
            grid.cells[li * multipliers.size() + mi] = cell;
        }
    }
    return grid;
}

ZeroingResult zeroing_run(const WeightSet& w, const SteeringVector& vec, int layer,
                          const std::vector<DatasetRecord>& records, const SweepOptions& opts) {
    if (layer < 0 || layer >= vec.n_layers)
        throw UsageError("zeroing_run: vector has no layer " + std::to_string(layer));
    RunOptions base_opts;
    base_opts.include_context = opts.include_context;
    base_opts.n_threads = opts.n_threads;

    auto [base_trials, base_report] = run_individual(w, records, base_opts);
    (void)base_report;

    RunOptions zero_opts = base_opts;
    zero_opts.edits = {steer_edit(vec, layer, 0.0, opts.steer_offset, opts.point, EditKind::zero)};
    auto [zero_trials, zero_report] = run_individual(w, records, zero_opts);
    (void)zero_report;

    ZeroingResult out;
    out.base_rates = rates_from_trials(base_trials, Paradigm::individual);
    out.zeroed_rates = rates_from_trials(zero_trials, Paradigm::individual);
    out.claim_base = 0.5 * (out.base_rates.claim_self + out.base_rates.claim_other);
    out.claim_zeroed = 0.5 * (out.zeroed_rates.claim_self + out.zeroed_rates.claim_other);
    out.n_trials = static_cast<int>(base_trials.size());
    return out;
}

namespace {

struct ColoredTrial {
    double p_correct_base = 0.0;
    double p_correct_colored = 0.0;
    double credit_base = 0.0;
    double credit_colored = 0.0;
    bool base_chose_colored = false;
    bool colored_chose_colored = false;
    bool has_colored_choice = false;
    int chosen_base = -1;
    int chosen_colored = -1;
};

double paired_credit(const TokenDistribution& dist, PairOrdering ordering) {
    const float lp1 = dist.log_prob(kTokLabel1);
    const float lp2 = dist.log_prob(kTokLabel2);
    const float lp_self = ordering == PairOrdering::self_first ? lp1 : lp2;
    const float lp_other = ordering == PairOrdering::self_first ? lp2 : lp1;
    return lp_self > lp_other ? 1.0 : (lp_self == lp_other ? 0.5 : 0.0);
}

} // namespace

ColoringResult coloring_run(const WeightSet& w, const SteeringVector& vec,
                            const std::vector<DatasetRecord>& records, Paradigm paradigm,
                            const ColoringOptions& opts) {
    if (paradigm == Paradigm::dummy) throw UsageError("coloring_run: dummy paradigm not supported");
    const int n_layers = w.config().n_layers;
    if (vec.n_layers != n_layers)
        throw UsageError("coloring_run: vector layer count does not match model");

    const size_t trials_per_record = 2;
    std::vector<ColoredTrial> trials(records.size() * trials_per_record);

    parallel_for(trials.size(), opts.n_threads, [&](size_t i) {
        const DatasetRecord& rec = records[i / 2];
        ColoredTrial out;
        if (paradigm == Paradigm::paired) {
            const PairOrdering ordering =
                (i % 2 == 0) ? PairOrdering::self_first : PairOrdering::self_second;
            PromptInfo prompt = paired_prompt(rec, ordering, opts.include_context);
            const int answer_pos = prompt.answer_position();

            std::vector<InterventionSpec> edits;
            const bool self_is_first = ordering == PairOrdering::self_first;
            const TokenSpan self_span = self_is_first ? prompt.text1_span : prompt.text2_span;
            const TokenSpan other_span = self_is_first ? prompt.text2_span : prompt.text1_span;
            auto add_span = [&](const TokenSpan& s) {
                auto span_edits =
                    color_span(vec.layers, n_layers, s.begin, s.end,
                               static_cast<float>(opts.multiplier), answer_pos, opts.kind);
                edits.insert(edits.end(), span_edits.begin(), span_edits.end());
            };
            TokenSpan colored_span{};
            bool track_choice = false;
            switch (opts.target) {
                case ColorTarget::self:
                case ColorTarget::evaluated:
                    add_span(self_span);
                    colored_span = self_span;
                    track_choice = true;
                    break;
                case ColorTarget::other:
                    add_span(other_span);
                    colored_span = other_span;
                    track_choice = true;
                    break;
                case ColorTarget::both:
                    add_span(prompt.text1_span);
                    add_span(prompt.text2_span);
                    break;
            }

            auto base = forward(w, prompt.tokens);
            auto colored = forward(w, prompt.tokens, std::nullopt, edits);
            const auto& bd = base.dists.back();
            const auto& cd = colored.dists.back();

            const int correct_tok = self_is_first ? kTokLabel1 : kTokLabel2;
            out.p_correct_base = std::exp(static_cast<double>(bd.log_prob(correct_tok)));
            out.p_correct_colored = std::exp(static_cast<double>(cd.log_prob(correct_tok)));
            out.credit_base = paired_credit(bd, ordering);
            out.credit_colored = paired_credit(cd, ordering);
            out.chosen_base = bd.argmax();
            out.chosen_colored = cd.argmax();
            if (track_choice) {
                const bool colored_is_first = colored_span.begin == prompt.text1_span.begin;
                const int colored_label = colored_is_first ? kTokLabel1 : kTokLabel2;
                const int other_label = colored_is_first ? kTokLabel2 : kTokLabel1;
                out.base_chose_colored = bd.log_prob(colored_label) > bd.log_prob(other_label);
                out.colored_chose_colored = cd.log_prob(colored_label) > cd.log_prob(other_label);
                out.has_colored_choice = true;
            }
        } else {
            const ProbeAuthor probe = (i % 2 == 0) ? ProbeAuthor::self : ProbeAuthor::other;
            PromptInfo prompt = individual_prompt(rec, probe, opts.include_context);
            const int answer_pos = prompt.answer_position();
            auto edits = color_span(vec.layers, n_layers, prompt.text_span.begin,
                                    prompt.text_span.end, static_cast<float>(opts.multiplier),
                                    answer_pos, opts.kind);

            auto base = forward(w, prompt.tokens);
            auto colored = forward(w, prompt.tokens, std::nullopt, edits);
            const auto& bd = base.dists.back();
            const auto& cd = colored.dists.back();
            const int correct_tok = probe == ProbeAuthor::self ? kTokYes : kTokNo;
            out.p_correct_base = std::exp(static_cast<double>(bd.log_prob(correct_tok)));
            out.p_correct_colored = std::exp(static_cast<double>(cd.log_prob(correct_tok)));
            out.credit_base = bd.log_prob(correct_tok) > bd.log_prob(correct_tok == kTokYes ? kTokNo : kTokYes)
                                  ? 1.0
                                  : 0.0;
            out.credit_colored =
                cd.log_prob(correct_tok) > cd.log_prob(correct_tok == kTokYes ? kTokNo : kTokYes)
                    ? 1.0
                    : 0.0;
            out.chosen_base = bd.argmax();
            out.chosen_colored = cd.argmax();
        }
        trials[i] = out;
    });

    ColoringResult result;
    result.baseline.paradigm = paradigm;
    result.colored.paradigm = paradigm;
    double base_acc = 0.0, colored_acc = 0.0;
    int choose_colored = 0, choose_total = 0, flips = 0, flip_candidates = 0;
    for (const auto& t : trials) {
        base_acc += t.credit_base;
        colored_acc += t.credit_colored;
        if (t.p_correct_colored < t.p_correct_base) {
            ++result.n_decreased;
            ++result.n_scored;
        } else if (t.p_correct_colored > t.p_correct_base) {
            ++result.n_scored;
        } else {
            ++result.n_ties;
        }
        if (t.has_colored_choice) {
            ++choose_total;
            if (t.colored_chose_colored) ++choose_colored;
            if (!t.base_chose_colored) {
                ++flip_candidates;
                if (t.colored_chose_colored) ++flips;
            }
        }
    }
    const int n = static_cast<int>(trials.size());
    result.baseline.n = n;
    result.colored.n = n;
    result.baseline.accuracy = n > 0 ? base_acc / n : 0.0;
    result.colored.accuracy = n > 0 ? colored_acc / n : 0.0;
    if (result.n_scored > 0) {
        result.pct_decreasing = 100.0 * result.n_decreased / result.n_scored;
        result.p_value = binom_test(result.n_decreased, result.n_scored);
    }
    if (choose_total > 0)
        result.choose_colored_rate = static_cast<double>(choose_colored) / choose_total;
    if (flip_candidates > 0) result.flip_rate = static_cast<double>(flips) / flip_candidates;
    return result;
}

double ActivationMap::at(size_t layer_idx, int offset_from_end) const {
    const int col = window - 1 + offset_from_end; // offset_from_end in (-window, 0]
    if (col < 0 || col >= window) throw UsageError("activation map offset out of window");
    return values.at(layer_idx * static_cast<size_t>(window) + static_cast<size_t>(col));
}

ActivationMap activation_map(const WeightSet& w, const std::vector<std::string>& texts,
                             const SteeringVector& vec, const ActivationMapOptions& opts) {
    if (texts.empty()) throw UsageError("activation_map: empty text set");
    if (opts.window < 1) throw UsageError("activation_map: window must be >= 1");
    const ModelConfig& cfg = w.config();
    if (vec.n_layers != cfg.n_layers)
        throw UsageError("activation_map: vector layer count does not match model");
    if (opts.reference_layer >= vec.n_layers)
        throw UsageError("activation_map: reference layer out of range");

    ActivationMap map;
    map.window = opts.window;
    map.reference_layer = opts.reference_layer;
    map.layers.resize(static_cast<size_t>(cfg.n_layers));
    for (int l = 0; l < cfg.n_layers; ++l) map.layers[static_cast<size_t>(l)] = l;
    map.values.assign(static_cast<size_t>(cfg.n_layers) * opts.window, 0.0);
    map.counts.assign(static_cast<size_t>(opts.window), 0);

    std::vector<std::vector<double>> per_text(texts.size());
    std::vector<int> text_len(texts.size(), 0);

    parallel_for(texts.size(), opts.n_threads, [&](size_t ti) {
        auto tokens = Tokenizer::encode(texts[ti]);
        if (tokens.empty()) throw DataError("activation_map: text tokenizes to nothing");
        const int seq = static_cast<int>(tokens.size());
        const int covered = std::min(seq, opts.window);
        CaptureSpec cap;
        cap.layers = map.layers;
        cap.point = opts.point;
        cap.positions = PositionSelector::span(seq - covered, seq);
        auto fr = forward(w, tokens, cap);

        std::vector<double> vals(static_cast<size_t>(cfg.n_layers) * covered);
        for (int l = 0; l < cfg.n_layers; ++l) {
            const auto& ref =
                opts.reference_layer >= 0 ? vec.layer(opts.reference_layer) : vec.layer(l);
            for (int o = 0; o < covered; ++o) {
                auto row = fr.tape->at(l, seq - covered + o);
                vals[static_cast<size_t>(l) * covered + o] = vec_dot(row, ref);
            }
        }
        per_text[ti] = std::move(vals);
        text_len[ti] = covered;
    });

    for (size_t ti = 0; ti < texts.size(); ++ti) {
        const int covered = text_len[ti];
        // Right-aligned: a text's last token lands in the map's last column.
        const int col0 = opts.window - covered;
        for (int o = 0; o < covered; ++o) ++map.counts[static_cast<size_t>(col0 + o)];
        for (int l = 0; l < cfg.n_layers; ++l)
            for (int o = 0; o < covered; ++o)
                map.values[static_cast<size_t>(l) * opts.window + col0 + o] +=
                    per_text[ti][static_cast<size_t>(l) * covered + o];
    }
    for (int l = 0; l < cfg.n_layers; ++l)
        for (int o = 0; o < opts.window; ++o) {
            const int c = map.counts[static_cast<size_t>(o)];
            if (c > 0) map.values[static_cast<size_t>(l) * opts.window + o] /= c;
        }
    return map;
}

std::vector<Correlation> last_token_correlation_curve(const WeightSet& w,
                                                      const SteeringVector& vec,
                                                      const std::vector<DatasetRecord>& records,
                                                      const SweepOptions& opts) {
    const ModelConfig& cfg = w.config();
    if (vec.n_layers != cfg.n_layers)
        throw UsageError("last_token_correlation_curve: vector layer count mismatch");
    const size_t n_trials = records.size() * 2;
    if (n_trials < 4)
        throw UsageError("last_token_correlation_curve: need at least 4 trials (2 records)");

    std::vector<std::vector<double>> proj(static_cast<size_t>(cfg.n_layers),
                                          std::vector<double>(n_trials, 0.0));
    std::vector<double> p_yes(n_trials, 0.0);

    parallel_for(n_trials, opts.n_threads, [&](size_t i) {
        const DatasetRecord& rec = records[i / 2];
        const ProbeAuthor probe = (i % 2 == 0) ? ProbeAuthor::self : ProbeAuthor::other;
        PromptInfo prompt = individual_prompt(rec, probe, opts.include_context);
        CaptureSpec cap;
        cap.layers.resize(static_cast<size_t>(cfg.n_layers));
        for (int l = 0; l < cfg.n_layers; ++l) cap.layers[static_cast<size_t>(l)] = l;
        cap.positions = PositionSelector::last();
        cap.point = opts.point;
        auto fr = forward(w, prompt.tokens, cap);
        const int last = static_cast<int>(prompt.tokens.size()) - 1;
        for (int l = 0; l < cfg.n_layers; ++l)
            proj[static_cast<size_t>(l)][i] = vec_dot(fr.tape->at(l, last), vec.layer(l));
        p_yes[i] = std::exp(static_cast<double>(fr.dists.back().log_prob(kTokYes)));
    });

    std::vector<Correlation> out;
    out.reserve(static_cast<size_t>(cfg.n_layers));
    for (int l = 0; l < cfg.n_layers; ++l)
        out.push_back(pearson_corr(proj[static_cast<size_t>(l)], p_yes));
    return out;
}

TopTexts top_activating_texts(const WeightSet& w,
                              const std::vector<std::pair<std::string, std::string>>& texts,
                              const SteeringVector& vec, int layer, int k, CapturePoint point,
                              int n_threads) {
    if (k < 0 || k > static_cast<int>(texts.size()))
        throw UsageError("top_activating_texts: k must be in [0, number of texts]");
    if (layer < 0 || layer >= vec.n_layers)
        throw UsageError("top_activating_texts: vector has no layer " + std::to_string(layer));

    std::vector<ScoredText> scored(texts.size());
    parallel_for(texts.size(), n_threads, [&](size_t i) {
        auto tokens = Tokenizer::encode(texts[i].second);
        if (tokens.empty()) throw DataError("top_activating_texts: empty text " + texts[i].first);
        CaptureSpec cap;
        cap.layers = {layer};
        cap.positions = PositionSelector::all();
        cap.point = point;
        auto fr = forward(w, tokens, cap);
        double acc = 0.0;
        for (int p = 0; p < static_cast<int>(tokens.size()); ++p)
            acc += vec_dot(fr.tape->at(layer, p), vec.layer(layer));
        scored[i] = ScoredText{texts[i].first, acc / static_cast<double>(tokens.size())};
    });

    auto by_desc = [](const ScoredText& a, const ScoredText& b) {
        if (a.mean_projection != b.mean_projection) return a.mean_projection > b.mean_projection;
        return a.id < b.id;
    };
    auto by_asc = [](const ScoredText& a, const ScoredText& b) {
        if (a.mean_projection != b.mean_projection) return a.mean_projection < b.mean_projection;
        return a.id < b.id;
    };

    TopTexts out;
    out.most_positive = scored;
    std::stable_sort(out.most_positive.begin(), out.most_positive.end(), by_desc);
    out.most_positive.resize(static_cast<size_t>(k));
    out.most_negative = scored;
    std::stable_sort(out.most_negative.begin(), out.most_negative.end(), by_asc);
    out.most_negative.resize(static_cast<size_t>(k));
    return out;
}

} // namespace residprobe
