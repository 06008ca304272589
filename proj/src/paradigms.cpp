#include "residprobe/paradigms.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace residprobe {

namespace {

std::vector<DatasetRecord> prepare_records(const std::vector<DatasetRecord>& records,
                                           const RunOptions& opts, EvalReport& report) {
    if (!opts.trim_limit) return records;
    TrimOutcome trimmed = trim_texts(records, *opts.trim_limit);
    report.dropped = static_cast<int>(trimmed.dropped_ids.size());
    report.dropped_ids = trimmed.dropped_ids;
    return trimmed.kept;
}

TrialRecord score_yes_no(const PromptInfo& prompt, const WeightSet& w,
                         const std::vector<InterventionSpec>& edits) {
    TrialRecord t;
    t.answer_token_a = kTokYes;
    t.answer_token_b = kTokNo;
    auto fr = forward(w, prompt.tokens, std::nullopt, edits);
    const auto& dist = fr.dists.back();
    t.logp_a = dist.log_prob(kTokYes);
    t.logp_b = dist.log_prob(kTokNo);
    t.chosen_token = dist.argmax();
    t.claims = t.chosen_token == kTokYes;
    return t;
}

void finish_report(EvalReport& r) {
    r.p_value = r.n_test > 0 ? binom_test(r.successes, r.n_test) : 1.0;
}

} // namespace

std::pair<std::vector<TrialRecord>, EvalReport>
run_paired(const WeightSet& w, const std::vector<DatasetRecord>& records, const RunOptions& opts) {
    EvalReport report;
    report.paradigm = Paradigm::paired;
    report.context_included = opts.include_context;
    const auto kept = prepare_records(records, opts, report);

    std::vector<TrialRecord> trials(kept.size() * 2);
    parallel_for(trials.size(), opts.n_threads, [&](size_t i) {
        const DatasetRecord& rec = kept[i / 2];
        const PairOrdering ordering =
            (i % 2 == 0) ? PairOrdering::self_first : PairOrdering::self_second;
        PromptInfo prompt = paired_prompt(rec, ordering, opts.include_context);
        auto fr = forward(w, prompt.tokens, std::nullopt, opts.edits);
        const auto& dist = fr.dists.back();

        TrialRecord t;
        t.record_id = rec.id;
        t.paradigm = Paradigm::paired;
        t.ordering = ordering;
        t.context_included = opts.include_context;
        t.answer_token_a = kTokLabel1;
        t.answer_token_b = kTokLabel2;
        t.logp_a = dist.log_prob(kTokLabel1);
        t.logp_b = dist.log_prob(kTokLabel2);
        t.chosen_token = dist.argmax();
        t.self_chars = static_cast<int>(rec.self_text.size());
        t.other_chars = static_cast<int>(rec.other_text.size());

        const float logp_self = ordering == PairOrdering::self_first ? t.logp_a : t.logp_b;
        const float logp_other = ordering == PairOrdering::self_first ? t.logp_b : t.logp_a;
        t.credit = logp_self > logp_other ? 1.0 : (logp_self == logp_other ? 0.5 : 0.0);
        trials[i] = std::move(t);
    });

    // Deterministic ordered fold over trials.
    double acc = 0.0;
    for (const auto& t : trials) {
        acc += t.credit;
        if (t.credit == 0.5) {
            ++report.ties;
        } else {
            ++report.n_test;
            if (t.credit == 1.0) ++report.successes;
        }
        if (t.chosen_token != kTokLabel1 && t.chosen_token != kTokLabel2) ++report.degenerate;
    }
    report.n = static_cast<int>(trials.size());
    report.accuracy = report.n > 0 ? acc / report.n : 0.0;
    finish_report(report);
    return {std::move(trials), report};
}

std::pair<std::vector<TrialRecord>, EvalReport>
run_individual(const WeightSet& w, const std::vector<DatasetRecord>& records,
               const RunOptions& opts) {
    EvalReport report;
    report.paradigm = Paradigm::individual;
    report.context_included = opts.include_context;
    const auto kept = prepare_records(records, opts, report);

    std::vector<TrialRecord> trials(kept.size() * 2);
    parallel_for(trials.size(), opts.n_threads, [&](size_t i) {
        const DatasetRecord& rec = kept[i / 2];
        const ProbeAuthor probe = (i % 2 == 0) ? ProbeAuthor::self : ProbeAuthor::other;
        PromptInfo prompt = individual_prompt(rec, probe, opts.include_context);
        TrialRecord t = score_yes_no(prompt, w, opts.edits);
        t.record_id = rec.id;
        t.paradigm = Paradigm::individual;
        t.probed_author = probe;
        t.context_included = opts.include_context;
        t.self_chars = static_cast<int>(rec.self_text.size());
        t.other_chars = static_cast<int>(rec.other_text.size());
        trials[i] = std::move(t);
    });

    int claims_self = 0, claims_other = 0;
    double acc = 0.0;
    for (size_t r = 0; r < kept.size(); ++r) {
        const TrialRecord& self_trial = trials[2 * r];
        const TrialRecord& other_trial = trials[2 * r + 1];
        const float yes_self = self_trial.logp_a;
        const float yes_other = other_trial.logp_a;
        const double credit = yes_self > yes_other ? 1.0 : (yes_self == yes_other ? 0.5 : 0.0);
        acc += credit;
        if (credit == 0.5) {
            ++report.ties;
        } else {
            ++report.n_test;
            if (credit == 1.0) ++report.successes;
        }
        if (self_trial.claims) ++claims_self;
        if (other_trial.claims) ++claims_other;
        if (self_trial.chosen_token != kTokYes && self_trial.chosen_token != kTokNo)
            ++report.degenerate;
        if (other_trial.chosen_token != kTokYes && other_trial.chosen_token != kTokNo)
            ++report.degenerate;
    }
    report.n = static_cast<int>(kept.size());
    report.accuracy = report.n > 0 ? acc / report.n : 0.0;
    if (!kept.empty()) {
        report.claim_rate_self = static_cast<double>(claims_self) / kept.size();
        report.claim_rate_other = static_cast<double>(claims_other) / kept.size();
        report.yes_rate = 0.5 * (report.claim_rate_self + report.claim_rate_other);
    }
    finish_report(report);
    return {std::move(trials), report};
}

std::pair<std::vector<TrialRecord>, EvalReport> run_dummy(const WeightSet& w,
                                                          const RunOptions& opts) {
    const auto& battery = dummy_battery();
    EvalReport report;
    report.paradigm = Paradigm::dummy;
    std::vector<TrialRecord> trials(battery.size());
    parallel_for(trials.size(), opts.n_threads, [&](size_t i) {
        PromptInfo prompt = dummy_prompt(battery[i]);
        TrialRecord t = score_yes_no(prompt, w, opts.edits);
        t.record_id = "dummy-" + std::to_string(i);
        t.paradigm = Paradigm::dummy;
        t.expected_yes = battery[i].has_name;
        trials[i] = std::move(t);
    });

    int yes = 0, correct = 0;
    for (const auto& t : trials) {
        if (t.claims) ++yes;
        if (t.claims == t.expected_yes) ++correct;
        if (t.chosen_token != kTokYes && t.chosen_token != kTokNo) ++report.degenerate;
    }
    report.n = static_cast<int>(trials.size());
    report.yes_rate = report.n > 0 ? static_cast<double>(yes) / report.n : 0.0;
    report.accuracy_vs_truth = report.n > 0 ? static_cast<double>(correct) / report.n : 0.0;
    report.accuracy = report.accuracy_vs_truth;
    report.successes = correct;
    report.n_test = report.n;
    finish_report(report);
    return {std::move(trials), report};
}

LengthCueStats length_cue_analysis(const std::vector<TrialRecord>& trials) {
    std::vector<double> len_ratio, prob_ratio, correctness;
    for (const auto& t : trials) {
        if (t.paradigm != Paradigm::paired) continue;
        if (t.self_chars <= 0 || t.other_chars <= 0) continue;
        const double lr = static_cast<double>(t.self_chars) / t.other_chars;
        const float logp_self = t.ordering == PairOrdering::self_first ? t.logp_a : t.logp_b;
        const float logp_other = t.ordering == PairOrdering::self_first ? t.logp_b : t.logp_a;
        len_ratio.push_back(lr);
        prob_ratio.push_back(std::exp(static_cast<double>(logp_self) - logp_other));
        correctness.push_back(t.credit);
    }
    if (len_ratio.size() < 10)
        throw UsageError("length_cue_analysis: need at least 10 paired trials");
    LengthCueStats out;
    out.len_prob_corr = pearson_corr(len_ratio, prob_ratio);
    out.fit = logistic_regression(len_ratio, correctness);
    return out;
}

std::vector<PerplexityRow> perplexity_table(const std::vector<PerplexityEntry>& entries) {
    std::map<std::string, std::vector<const PerplexityEntry*>> by_dataset;
    for (const auto& e : entries) by_dataset[e.dataset].push_back(&e);

    std::vector<PerplexityRow> rows;
    for (const auto& [dataset, group] : by_dataset) {
        PerplexityRow row;
        row.dataset = dataset;
        row.n = static_cast<int>(group.size());
        std::vector<double> ratios, probs;
        int lower = 0;
        for (const auto* e : group) {
            ratios.push_back(e->ppl_self / e->ppl_other);
            probs.push_back(e->prob_ratio);
            if (e->ppl_self < e->ppl_other) ++lower;
        }
        row.median_ratio = median(ratios);
        row.pct_self_lower = 100.0 * lower / group.size();
        if (group.size() >= 4) {
            try {
                row.corr = pearson_corr(ratios, probs);
                row.corr_defined = true;
            } catch (const UsageError&) {
                row.corr_defined = false;
            }
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<PerplexityRow> perplexity_analysis(const WeightSet& w,
                                               const std::vector<DatasetRecord>& records,
                                               const RunOptions& opts) {
    if (records.size() < 2) throw UsageError("perplexity_analysis: need at least 2 records");
    std::vector<DatasetRecord> kept = records;
    if (opts.trim_limit) kept = trim_texts(records, *opts.trim_limit).kept;
    RunOptions run_opts = opts;
    run_opts.trim_limit.reset();
    auto [trials, report] = run_paired(w, kept, run_opts);
    (void)report;

    // Average the two orderings' self/other probability ratios per record.
    std::map<std::string, std::pair<double, int>> ratio_acc;
    for (const auto& t : trials) {
        const float logp_self = t.ordering == PairOrdering::self_first ? t.logp_a : t.logp_b;
        const float logp_other = t.ordering == PairOrdering::self_first ? t.logp_b : t.logp_a;
        auto& acc = ratio_acc[t.record_id];
        acc.first += std::exp(static_cast<double>(logp_self) - logp_other);
        acc.second += 1;
    }

    std::vector<PerplexityEntry> entries(kept.size());
    parallel_for(kept.size(), opts.n_threads, [&](size_t i) {
        const auto& rec = kept[i];
        PerplexityEntry e;
        e.dataset = rec.dataset;
        std::vector<int> self_toks = {TOK_BOS};
        for (int t : Tokenizer::encode(rec.self_text)) self_toks.push_back(t);
        std::vector<int> other_toks = {TOK_BOS};
        for (int t : Tokenizer::encode(rec.other_text)) other_toks.push_back(t);
        e.ppl_self = sequence_log_prob(w, self_toks).perplexity;
        e.ppl_other = sequence_log_prob(w, other_toks).perplexity;
        auto it = ratio_acc.find(rec.id);
        e.prob_ratio = it != ratio_acc.end() && it->second.second > 0
                           ? it->second.first / it->second.second
                           : 1.0;
        entries[i] = std::move(e);
    });
    return perplexity_table(entries);
}

} // namespace residprobe
