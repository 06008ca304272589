#pragma once

#include <optional>
#include <utility>

#include "residprobe/dataset.hpp"
#include "residprobe/model.hpp"
#include "residprobe/prompts.hpp"
#include "residprobe/stats.hpp"

namespace residprobe {

// One paradigm presentation: prompt, answer-token log-probs, outcome.
struct TrialRecord {
    std::string record_id;
    Paradigm paradigm = Paradigm::paired;
    PairOrdering ordering = PairOrdering::self_first; // paired only
    ProbeAuthor probed_author = ProbeAuthor::self;    // individual only
    bool context_included = true;

    int answer_token_a = 0; // "1"/"Yes"
    int answer_token_b = 0; // "2"/"No"
    float logp_a = 0.0f;
    float logp_b = 0.0f;
    int chosen_token = -1; // full-vocabulary argmax at the answer position

    double credit = 0.0; // paired: 1 correct, 0.5 tie, 0 wrong
    bool claims = false; // individual/dummy: argmax == Yes
    bool expected_yes = false; // dummy battery ground truth

    int self_chars = 0;
    int other_chars = 0;
};

struct EvalReport {
    Paradigm paradigm = Paradigm::paired;
    bool context_included = true;
    int n = 0;           // scoring units: paired trials, or record pairs
    double accuracy = 0; // ties credit 0.5
    int successes = 0;   // non-tied correct units
    int ties = 0;
    int n_test = 0;      // non-tied units (basis of the exact binomial test)
    double p_value = 1.0;
    int dropped = 0;
    std::vector<std::string> dropped_ids;
    int degenerate = 0; // argmax fell outside the designated answer tokens
    // Trial-level rates (individual, dummy).
    double claim_rate_self = 0.0;
    double claim_rate_other = 0.0;
    double yes_rate = 0.0;
    double accuracy_vs_truth = 0.0; // dummy only
};

struct RunOptions {
    bool include_context = true;
    std::optional<int> trim_limit;
    std::vector<InterventionSpec> edits;
    int n_threads = 1;
};

// Paired presentation: each record yields two trials (self first / self
// second); a trial is correct when the self text's label gets the higher
// log-prob. Ties earn half credit and are excluded from the exact test.
std::pair<std::vector<TrialRecord>, EvalReport>
run_paired(const WeightSet& w, const std::vector<DatasetRecord>& records, const RunOptions& opts);

// Individual presentation: each record yields a self probe and an other
// probe; the pair counts correct when P(Yes|self) > P(Yes|other).
std::pair<std::vector<TrialRecord>, EvalReport>
run_individual(const WeightSet& w, const std::vector<DatasetRecord>& records,
               const RunOptions& opts);

// Built-in person-name-recognition battery with the same Yes/No capture
// machinery; used to test steering specificity.
std::pair<std::vector<TrialRecord>, EvalReport> run_dummy(const WeightSet& w,
                                                          const RunOptions& opts);

struct LengthCueStats {
    Correlation len_prob_corr; // self/other length ratio vs probability ratio
    LogisticFit fit;           // correctness on length ratio
};

LengthCueStats length_cue_analysis(const std::vector<TrialRecord>& trials);

struct PerplexityEntry {
    std::string dataset;
    double ppl_self = 0.0;
    double ppl_other = 0.0;
    double prob_ratio = 0.0; // averaged self/other answer-probability ratio
};

struct PerplexityRow {
    std::string dataset;
    int n = 0;
    double median_ratio = 0.0;   // median self/other perplexity ratio
    double pct_self_lower = 0.0; // % pairs with self perplexity below other
    Correlation corr;            // perplexity ratio vs probability ratio
    bool corr_defined = false;
};

// Aggregation core, separable so the arithmetic can be checked directly.
std::vector<PerplexityRow> perplexity_table(const std::vector<PerplexityEntry>& entries);

// Computes text perplexities with the model's own representations and relates
// them to paired-presentation probability ratios, one row per dataset.
std::vector<PerplexityRow> perplexity_analysis(const WeightSet& w,
                                               const std::vector<DatasetRecord>& records,
                                               const RunOptions& opts);

} // namespace residprobe
