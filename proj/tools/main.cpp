#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>

#include "repl.hpp"
#include "residprobe/analysis.hpp"
#include "residprobe/contrast.hpp"
#include "residprobe/report_io.hpp"
#include "residprobe/synthetic.hpp"

namespace fs = std::filesystem;
using namespace residprobe;
using nlohmann::json;

namespace {

// Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitInternal = 3;

std::vector<int> parse_layer_list(const std::string& spec, int n_layers) {
    std::vector<int> out;
    std::istringstream ss(spec);
    std::string part;
    while (std::getline(ss, part, ',')) {
        const auto dots = part.find("..");
        if (dots != std::string::npos) {
            const int lo = std::stoi(part.substr(0, dots));
            const int hi = std::stoi(part.substr(dots + 2));
            for (int l = lo; l <= hi; ++l) out.push_back(l);
        } else if (!part.empty()) {
            out.push_back(std::stoi(part));
        }
    }
    if (out.empty()) throw UsageError("empty layer list: '" + spec + "'");
    for (int l : out)
        if (l < 0 || l >= n_layers)
            throw UsageError("layer " + std::to_string(l) + " out of range (model has " +
                             std::to_string(n_layers) + ")");
    return out;
}

std::vector<double> parse_double_list(const std::string& spec) {
    std::vector<double> out;
    std::istringstream ss(spec);
    std::string part;
    while (std::getline(ss, part, ','))
        if (!part.empty()) out.push_back(std::stod(part));
    if (out.empty()) throw UsageError("empty list: '" + spec + "'");
    return out;
}

Paradigm parse_paradigm(const std::string& name) {
    if (name == "paired") return Paradigm::paired;
    if (name == "individual") return Paradigm::individual;
    if (name == "dummy") return Paradigm::dummy;
    throw UsageError("unknown paradigm: " + name);
}

// Flat-key JSON config file; command-line flags override its values.
std::vector<std::string> expand_config_args(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    std::string config_path;
    for (size_t i = 0; i + 1 < args.size(); ++i)
        if (args[i] == "--config") config_path = args[i + 1];
    for (auto& a : args)
        if (a.rfind("--config=", 0) == 0) config_path = a.substr(9);
    if (config_path.empty()) return args;

    std::ifstream f(config_path);
    if (!f) throw DataError("cannot open config: " + config_path);
    json j;
    try {
        j = json::parse(f);
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed config JSON: ") + e.what());
    }
    if (!j.is_object()) throw DataError("config must be a flat JSON object");

    // Config-derived flags come first so explicit flags win (TakeLast).
    std::vector<std::string> expanded;
    if (!args.empty()) expanded.push_back(args[0]); // subcommand
    for (const auto& [key, value] : j.items()) {
        if (value.is_boolean()) {
            if (value.get<bool>()) expanded.push_back("--" + key);
            continue;
        }
        expanded.push_back("--" + key);
        expanded.push_back(value.is_string() ? value.get<std::string>() : value.dump());
    }
    for (size_t i = 1; i < args.size(); ++i) expanded.push_back(args[i]);
    return expanded;
}

void allow_overrides(CLI::App* app) {
    for (auto* opt : app->get_options())
        if (opt->get_expected_min() > 0) opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    for (auto* sub : app->get_subcommands({})) allow_overrides(sub);
}

std::string hash_json(const json& j) { return hex64(fnv1a64(j.dump())); }

struct ArtifactContext {
    Provenance prov;
    std::string out_dir;

    void write(const std::string& name, const std::string& content) const {
        write_text_file((fs::path(out_dir) / name).string(), content);
    }
};

ArtifactContext make_context(const std::string& out_dir, const json& resolved,
                             const std::string& model_path, const std::string& vector_path,
                             uint64_t seed) {
    ArtifactContext ctx;
    ctx.out_dir = out_dir;
    if (!out_dir.empty()) fs::create_directories(out_dir);
    ctx.prov.config_hash = hash_json(resolved);
    ctx.prov.model_checksum = model_path.empty() ? "" : hex64(file_checksum(model_path));
    ctx.prov.vector_checksum = vector_path.empty() ? "" : hex64(file_checksum(vector_path));
    ctx.prov.seed = seed;
    return ctx;
}

std::vector<InterventionSpec> build_cli_edit(const WeightSet& w, const SteeringVector& vec,
                                             const std::string& kind,
                                             const std::string& layers_spec, double mult,
                                             int offset, const std::string& point) {
    InterventionSpec e;
    if (kind == "add") e.kind = EditKind::add;
    else if (kind == "zero") e.kind = EditKind::zero;
    else throw UsageError("edit kind must be add or zero");
    e.layers = parse_layer_list(layers_spec, w.config().n_layers);
    e.positions = PositionSelector::at_offset(offset);
    e.direction = vec.layers;
    e.multiplier = static_cast<float>(mult);
    if (point == "input") e.point = CapturePoint::block_input;
    else if (point == "output") e.point = CapturePoint::block_output;
    else throw UsageError("point must be input or output");
    return {e};
}

std::vector<std::pair<std::string, std::string>> texts_from_records(
    const std::vector<DatasetRecord>& records, const std::string& which) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& r : records) {
        if (which == "self" || which == "both") out.emplace_back(r.id + "/self", r.self_text);
        if (which == "other" || which == "both") out.emplace_back(r.id + "/other", r.other_text);
    }
    if (out.empty()) throw UsageError("--which must be self, other or both");
    return out;
}

int dispatch(int argc, char** argv) {
    CLI::App app{"residual-stream self-recognition workbench"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");

    // Shared option storage. Each subcommand registers what it needs.
    std::string model_path, data_path, vector_path, vector2_path, out_path, out_dir;
    std::string paradigm_name = "individual", kind = "add", point = "output";
    std::string layers_spec, mults_spec = "0,1,2,4,8", which = "both", target = "evaluated";
    std::string script_path, transcript_path, system_prompt, config_path;
    uint64_t seed = 0;
    int layers_n = 4, dim = 64, heads = 4, ff = 128, max_seq = 768, vocab = kMinVocab;
    double eps = 1e-5;
    int k_window = 10, top_k = 10, window = 100, ref_layer = -1, layer = -1, k_texts = 5;
    int offset = -2, trim_limit = 0, threads = 0, max_new = 48;
    double mult = 4.0, confidence = 0.0;
    bool no_context = false, no_nuisance = false, all_slots = false, average = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "flat-key JSON config; flags override");
        sub->add_option("--threads", threads, "worker cap (also capped by RESID_PROBE_THREADS)");
        sub->add_option("--seed", seed, "seed recorded in artifacts");
    };

    auto* cmd_init = app.add_subcommand("init-model", "create a seeded random model");
    cmd_init->add_option("--out", out_path, "weight file path")->required();
    cmd_init->add_option("--layers", layers_n, "transformer layers");
    cmd_init->add_option("--dim", dim, "model width");
    cmd_init->add_option("--heads", heads, "attention heads");
    cmd_init->add_option("--ff", ff, "feed-forward width");
    cmd_init->add_option("--max-seq", max_seq, "maximum sequence length");
    cmd_init->add_option("--vocab", vocab, "vocabulary size (>= 264)");
    cmd_init->add_option("--eps", eps, "normalization epsilon");
    add_common(cmd_init);

    auto* cmd_extract = app.add_subcommand("extract", "build the self-recognition vector");
    cmd_extract->add_option("--model", model_path)->required();
    cmd_extract->add_option("--data", data_path)->required();
    cmd_extract->add_option("--out", out_path, "vector file path")->required();
    cmd_extract->add_option("--k", k_window, "final-token capture window");
    cmd_extract->add_option("--confidence-threshold", confidence,
                            "minimum answer probability during screening (0 = off)");
    cmd_extract->add_flag("--no-context", no_context);
    cmd_extract->add_flag("--no-nuisance", no_nuisance, "skip nuisance out-projection");
    cmd_extract->add_flag("--all-slots", all_slots, "also write every token-slot vector");
    cmd_extract->add_option("--point", point, "capture point: input|output");
    add_common(cmd_extract);

    auto* cmd_eval = app.add_subcommand("eval", "run a presentation paradigm");
    cmd_eval->add_option("--model", model_path)->required();
    cmd_eval->add_option("--data", data_path);
    cmd_eval->add_option("--paradigm", paradigm_name, "paired|individual|dummy");
    cmd_eval->add_flag("--no-context", no_context);
    cmd_eval->add_option("--trim", trim_limit, "character trim limit (0 = off)");
    cmd_eval->add_option("--vector", vector_path, "steering vector for an edit");
    cmd_eval->add_option("--kind", kind, "edit kind: add|zero");
    cmd_eval->add_option("--edit-layers", layers_spec, "layers for the edit, e.g. 2 or 0..3");
    cmd_eval->add_option("--mult", mult, "edit multiplier");
    cmd_eval->add_option("--offset", offset, "edit token offset");
    cmd_eval->add_option("--point", point, "edit point: input|output");
    cmd_eval->add_option("--out-dir", out_dir)->required();
    add_common(cmd_eval);

    auto* cmd_sweep = app.add_subcommand("sweep", "steering effectiveness grid");
    cmd_sweep->add_option("--model", model_path)->required();
    cmd_sweep->add_option("--data", data_path)->required();
    cmd_sweep->add_option("--vector", vector_path)->required();
    cmd_sweep->add_option("--layers", layers_spec, "swept layers, e.g. 0..3")->required();
    cmd_sweep->add_option("--mults", mults_spec, "swept multipliers, e.g. 0,1,2,4,8");
    cmd_sweep->add_option("--paradigm", paradigm_name, "individual|dummy");
    cmd_sweep->add_flag("--no-context", no_context);
    cmd_sweep->add_option("--offset", offset);
    cmd_sweep->add_option("--point", point, "edit point: input|output");
    cmd_sweep->add_option("--out-dir", out_dir)->required();
    add_common(cmd_sweep);

    auto* cmd_zero = app.add_subcommand("zero", "claim rates with the vector projected out");
    cmd_zero->add_option("--model", model_path)->required();
    cmd_zero->add_option("--data", data_path)->required();
    cmd_zero->add_option("--vector", vector_path)->required();
    cmd_zero->add_option("--layer", layer, "zeroed layer")->required();
    cmd_zero->add_flag("--no-context", no_context);
    cmd_zero->add_option("--offset", offset);
    cmd_zero->add_option("--point", point, "edit point: input|output");
    cmd_zero->add_option("--out-dir", out_dir)->required();
    add_common(cmd_zero);

    auto* cmd_color = app.add_subcommand("color", "apply the vector to evaluated text tokens");
    cmd_color->add_option("--model", model_path)->required();
    cmd_color->add_option("--data", data_path)->required();
    cmd_color->add_option("--vector", vector_path)->required();
    cmd_color->add_option("--paradigm", paradigm_name, "paired|individual");
    cmd_color->add_option("--kind", kind, "add|zero");
    cmd_color->add_option("--mult", mult, "signed coloring multiplier");
    cmd_color->add_option("--target", target, "self|other|both|evaluated");
    cmd_color->add_flag("--both-texts", [&target](size_t) { target = "both"; },
                        "color both paired texts");
    cmd_color->add_flag("--no-context", no_context);
    cmd_color->add_option("--out-dir", out_dir)->required();
    add_common(cmd_color);

    auto* cmd_decode = app.add_subcommand("decode", "logit-lens readout of a vector");
    cmd_decode->add_option("--model", model_path)->required();
    cmd_decode->add_option("--vector", vector_path)->required();
    cmd_decode->add_option("--vector2", vector2_path, "second vector (with --average)");
    cmd_decode->add_flag("--average", average, "decode the normalized average of both vectors");
    cmd_decode->add_option("--layer", layer, "vector layer to decode (-1 = primary steer layer)");
    cmd_decode->add_option("--top-k", top_k);
    cmd_decode->add_option("--out-dir", out_dir);
    add_common(cmd_decode);

    auto* cmd_map = app.add_subcommand("activation-map", "layer x token-offset projection map");
    cmd_map->add_option("--model", model_path)->required();
    cmd_map->add_option("--data", data_path)->required();
    cmd_map->add_option("--vector", vector_path)->required();
    cmd_map->add_option("--which", which, "texts to use: self|other|both");
    cmd_map->add_option("--window", window, "token window from the end");
    cmd_map->add_option("--ref-layer", ref_layer, "project onto this layer's vector (-1 = own)");
    cmd_map->add_option("--point", point, "capture point: input|output");
    cmd_map->add_option("--out-dir", out_dir)->required();
    add_common(cmd_map);

    auto* cmd_top = app.add_subcommand("top-texts", "texts that most activate the vector");
    cmd_top->add_option("--model", model_path)->required();
    cmd_top->add_option("--data", data_path)->required();
    cmd_top->add_option("--vector", vector_path)->required();
    cmd_top->add_option("--layer", layer)->required();
    cmd_top->add_option("--k", k_texts, "texts per list");
    cmd_top->add_option("--which", which, "self|other|both");
    cmd_top->add_option("--out-dir", out_dir);
    add_common(cmd_top);

    auto* cmd_repl = app.add_subcommand("repl", "interactive steering exploration");
    cmd_repl->add_option("--model", model_path)->required();
    cmd_repl->add_option("--vector", vector_path)->required();
    cmd_repl->add_option("--mult", mult);
    cmd_repl->add_option("--layer", layers_spec, "steered layer list");
    cmd_repl->add_option("--offset", offset);
    cmd_repl->add_option("--max-new", max_new);
    cmd_repl->add_option("--system", system_prompt);
    cmd_repl->add_option("--script", script_path, "read commands from a file");
    cmd_repl->add_option("--transcript", transcript_path, "mirror the session to a file");
    add_common(cmd_repl);

    allow_overrides(&app);
    auto args = expand_config_args(argc, argv);
    std::vector<const char*> cargs;
    cargs.push_back(argv[0]);
    for (const auto& a : args) cargs.push_back(a.c_str());
    app.parse(static_cast<int>(cargs.size()), cargs.data());

    const int n_threads = resolve_threads(threads);

    if (cmd_init->parsed()) {
        ModelConfig cfg;
        cfg.n_layers = layers_n;
        cfg.d_model = dim;
        cfg.n_heads = heads;
        cfg.d_ff = ff;
        cfg.max_seq_len = max_seq;
        cfg.vocab_size = vocab;
        cfg.norm_epsilon = static_cast<float>(eps);
        cfg.seed = seed;
        auto w = init_model(cfg);
        save_weights(w, out_path);
        std::cout << "wrote " << out_path << "\n"
                  << "checksum " << hex64(file_checksum(out_path)) << "\n";
        return kExitOk;
    }

    if (cmd_extract->parsed()) {
        auto w = load_weights(model_path);
        auto records = load_records(data_path);
        if (records.empty()) throw DataError("dataset is empty: " + data_path);
        auto pairs = make_contrast_pairs(records, !no_context);
        ScreenOptions so;
        so.n_threads = n_threads;
        if (confidence > 0.0) so.confidence_threshold = confidence;
        auto kept = screen_pairs(w, pairs, so);
        std::cout << "screened pairs: kept " << kept.size() << " of " << pairs.size() << "\n";
        if (kept.empty()) throw DataError("no pairs survived screening");

        ExtractOptions eo;
        eo.k_window = k_window;
        eo.n_threads = n_threads;
        eo.point = point == "input" ? CapturePoint::block_input : CapturePoint::block_output;
        eo.provenance = "data=" + fs::path(data_path).filename().string() +
                        ";pairs=" + std::to_string(kept.size()) + ";seed=" + std::to_string(seed);
        auto slots = extract_vector(w, kept, eo);
        auto& primary = slots[static_cast<size_t>(k_window >= 2 ? k_window - 2 : 0)];

        std::cout << "pre-normalization norms (primary slot), by layer:\n";
        for (int l = 0; l < primary.n_layers; ++l)
            std::cout << "  layer " << l << ": " << format_double(primary.pre_norm[l]) << "\n";

        if (!no_nuisance) {
            auto nuisance = extract_nuisance(w, eo.point, n_threads);
            std::cout << "nuisance battery: " << nuisance.pairs_used << " pairs used, "
                      << nuisance.pairs_skipped << " degenerate\n";
            for (auto& slot : slots) slot = project_out_nuisance(slot, nuisance.vector);
        }
        save_vector(slots[static_cast<size_t>(k_window >= 2 ? k_window - 2 : 0)], out_path);
        std::cout << "wrote " << out_path << "\n"
                  << "checksum " << hex64(file_checksum(out_path)) << "\n";
        if (all_slots)
            for (int s = 0; s < k_window; ++s)
                save_vector(slots[static_cast<size_t>(s)], out_path + ".slot" + std::to_string(s));
        return kExitOk;
    }

    if (cmd_eval->parsed()) {
        auto w = load_weights(model_path);
        const Paradigm paradigm = parse_paradigm(paradigm_name);
        std::vector<DatasetRecord> records;
        if (paradigm != Paradigm::dummy) {
            if (data_path.empty()) throw UsageError("--data is required for this paradigm");
            records = load_records(data_path);
        }
        RunOptions ro;
        ro.include_context = !no_context;
        if (trim_limit > 0) ro.trim_limit = trim_limit;
        ro.n_threads = n_threads;
        SteeringVector vec;
        if (!vector_path.empty()) {
            vec = load_vector(vector_path);
            if (layers_spec.empty()) throw UsageError("--edit-layers is required with --vector");
            ro.edits = build_cli_edit(w, vec, kind, layers_spec, mult, offset, point);
        }

        json resolved = {{"cmd", "eval"},        {"model", model_path},  {"data", data_path},
                         {"paradigm", paradigm_name}, {"no_context", no_context},
                         {"trim", trim_limit},   {"vector", vector_path}, {"kind", kind},
                         {"edit_layers", layers_spec}, {"mult", mult},   {"offset", offset},
                         {"point", point},       {"seed", seed}};
        auto ctx = make_context(out_dir, resolved, model_path, vector_path, seed);

        std::pair<std::vector<TrialRecord>, EvalReport> result;
        switch (paradigm) {
            case Paradigm::paired: result = run_paired(w, records, ro); break;
            case Paradigm::individual: result = run_individual(w, records, ro); break;
            case Paradigm::dummy: result = run_dummy(w, ro); break;
        }
        ctx.write("trials.csv", trials_csv(result.first, ctx.prov));
        ctx.write("report.json", report_json(result.second, ctx.prov));
        std::cout << "n=" << result.second.n << " accuracy=" << format_double(result.second.accuracy)
                  << " p=" << format_double(result.second.p_value) << "\n"
                  << "wrote " << (fs::path(out_dir) / "report.json").string() << "\n";
        return kExitOk;
    }

    if (cmd_sweep->parsed()) {
        auto w = load_weights(model_path);
        auto records = load_records(data_path);
        auto vec = load_vector(vector_path);
        auto layers = parse_layer_list(layers_spec, w.config().n_layers);
        auto mults = parse_double_list(mults_spec);
        SweepOptions so;
        so.include_context = !no_context;
        so.steer_offset = offset;
        so.point = point == "input" ? CapturePoint::block_input : CapturePoint::block_output;
        so.n_threads = n_threads;

        json resolved = {{"cmd", "sweep"},   {"model", model_path}, {"data", data_path},
                         {"vector", vector_path}, {"layers", layers_spec}, {"mults", mults_spec},
                         {"paradigm", paradigm_name}, {"no_context", no_context},
                         {"offset", offset}, {"point", point},      {"seed", seed}};
        auto ctx = make_context(out_dir, resolved, model_path, vector_path, seed);

        auto grid =
            steering_sweep(w, vec, layers, mults, records, parse_paradigm(paradigm_name), so);
        ctx.write("grid.csv", grid_csv(grid, ctx.prov));
        ctx.write("grid.json", grid_json(grid, ctx.prov));
        ctx.write("grid.svg", grid_svg(grid, ctx.prov));
        std::cout << "wrote " << (fs::path(out_dir) / "grid.csv").string() << "\n";
        return kExitOk;
    }

    if (cmd_zero->parsed()) {
        auto w = load_weights(model_path);
        auto records = load_records(data_path);
        auto vec = load_vector(vector_path);
        SweepOptions so;
        so.include_context = !no_context;
        so.steer_offset = offset;
        so.point = point == "input" ? CapturePoint::block_input : CapturePoint::block_output;
        so.n_threads = n_threads;

        json resolved = {{"cmd", "zero"},  {"model", model_path}, {"data", data_path},
                         {"vector", vector_path}, {"layer", layer},     {"no_context", no_context},
                         {"offset", offset}, {"point", point},    {"seed", seed}};
        auto ctx = make_context(out_dir, resolved, model_path, vector_path, seed);

        auto zr = zeroing_run(w, vec, layer, records, so);
        json out = {{"claim_rate_baseline", zr.claim_base},
                    {"claim_rate_zeroed", zr.claim_zeroed},
                    {"claim_self_baseline", zr.base_rates.claim_self},
                    {"claim_other_baseline", zr.base_rates.claim_other},
                    {"claim_self_zeroed", zr.zeroed_rates.claim_self},
                    {"claim_other_zeroed", zr.zeroed_rates.claim_other},
                    {"n_trials", zr.n_trials},
                    {"layer", layer},
                    {"provenance",
                     {{"config_hash", ctx.prov.config_hash},
                      {"model_checksum", ctx.prov.model_checksum},
                      {"vector_checksum", ctx.prov.vector_checksum},
                      {"seed", ctx.prov.seed}}}};
        ctx.write("zeroing.json", out.dump(2) + "\n");
        std::cout << "claim rate: baseline " << format_double(zr.claim_base) << " -> zeroed "
                  << format_double(zr.claim_zeroed) << "\n"
                  << "wrote " << (fs::path(out_dir) / "zeroing.json").string() << "\n";
        return kExitOk;
    }

    if (cmd_color->parsed()) {
        auto w = load_weights(model_path);
        auto records = load_records(data_path);
        auto vec = load_vector(vector_path);
        ColoringOptions co;
        co.kind = kind == "zero" ? EditKind::zero : EditKind::add;
        co.multiplier = mult;
        if (target == "self") co.target = ColorTarget::self;
        else if (target == "other") co.target = ColorTarget::other;
        else if (target == "both") co.target = ColorTarget::both;
        else if (target == "evaluated") co.target = ColorTarget::evaluated;
        else throw UsageError("--target must be self, other, both or evaluated");
        co.include_context = !no_context;
        co.n_threads = n_threads;

        json resolved = {{"cmd", "color"}, {"model", model_path}, {"data", data_path},
                         {"vector", vector_path}, {"paradigm", paradigm_name}, {"kind", kind},
                         {"mult", mult},   {"target", target},    {"no_context", no_context},
                         {"seed", seed}};
        auto ctx = make_context(out_dir, resolved, model_path, vector_path, seed);

        auto cr = coloring_run(w, vec, records, parse_paradigm(paradigm_name), co);
        json out = {{"baseline_accuracy", cr.baseline.accuracy},
                    {"colored_accuracy", cr.colored.accuracy},
                    {"n_trials", cr.baseline.n},
                    {"pct_decreasing", cr.pct_decreasing},
                    {"n_decreased", cr.n_decreased},
                    {"n_scored", cr.n_scored},
                    {"n_ties", cr.n_ties},
                    {"p_value", cr.p_value},
                    {"choose_colored_rate", cr.choose_colored_rate},
                    {"flip_rate", cr.flip_rate},
                    {"provenance",
                     {{"config_hash", ctx.prov.config_hash},
                      {"model_checksum", ctx.prov.model_checksum},
                      {"vector_checksum", ctx.prov.vector_checksum},
                      {"seed", ctx.prov.seed}}}};
        ctx.write("coloring.json", out.dump(2) + "\n");
        std::cout << "%decreasing=" << format_double(cr.pct_decreasing)
                  << " p=" << format_double(cr.p_value) << "\n"
                  << "wrote " << (fs::path(out_dir) / "coloring.json").string() << "\n";
        return kExitOk;
    }

    if (cmd_decode->parsed()) {
        auto w = load_weights(model_path);
        auto vec = load_vector(vector_path);
        if (average) {
            if (vector2_path.empty()) throw UsageError("--average needs --vector2");
            vec = average_vectors(vec, load_vector(vector2_path));
        }
        const int decode_layer = layer >= 0 ? layer : std::min(16, vec.n_layers - 1);
        if (decode_layer >= vec.n_layers)
            throw UsageError("vector has no layer " + std::to_string(decode_layer));
        auto readout = logit_lens_decode(w, vec.layer(decode_layer), top_k);

        auto print_side = [&](const char* label, const std::vector<DecodedToken>& side) {
            std::cout << label << "\n";
            for (const auto& t : side) {
                std::string repr = Tokenizer::decode_token(t.token);
                for (auto& ch : repr)
                    if (static_cast<unsigned char>(ch) < 0x20 || static_cast<unsigned char>(ch) > 0x7e)
                        ch = '.';
                std::cout << "  " << t.token << " '" << repr << "' " << format_float(t.score)
                          << "\n";
            }
        };
        print_side("positive direction:", readout.positive);
        print_side("negative direction:", readout.negative);

        if (!out_dir.empty()) {
            json resolved = {{"cmd", "decode"},      {"model", model_path},
                             {"vector", vector_path}, {"vector2", vector2_path},
                             {"average", average},    {"layer", decode_layer},
                             {"top_k", top_k},        {"seed", seed}};
            auto ctx = make_context(out_dir, resolved, model_path, vector_path, seed);
            json out;
            out["layer"] = decode_layer;
            for (const char* side : {"positive", "negative"}) {
                const auto& v = side == std::string("positive") ? readout.positive : readout.negative;
                json list = json::array();
                for (const auto& t : v) list.push_back({{"token", t.token}, {"score", t.score}});
                out[side] = list;
            }
            out["provenance"] = {{"config_hash", ctx.prov.config_hash},
                                 {"model_checksum", ctx.prov.model_checksum},
                                 {"vector_checksum", ctx.prov.vector_checksum},
                                 {"seed", ctx.prov.seed}};
            ctx.write("decode.json", out.dump(2) + "\n");
        }
        return kExitOk;
    }

    if (cmd_map->parsed()) {
        auto w = load_weights(model_path);
        auto records = load_records(data_path);
        auto vec = load_vector(vector_path);
        std::vector<std::string> texts;
        for (const auto& [id, text] : texts_from_records(records, which)) {
            (void)id;
            texts.push_back(text);
        }
        ActivationMapOptions mo;
        mo.window = window;
        mo.reference_layer = ref_layer;
        mo.point = point == "input" ? CapturePoint::block_input : CapturePoint::block_output;
        mo.n_threads = n_threads;

        json resolved = {{"cmd", "activation-map"}, {"model", model_path}, {"data", data_path},
                         {"vector", vector_path},   {"which", which},      {"window", window},
                         {"ref_layer", ref_layer},  {"point", point},      {"seed", seed}};
        auto ctx = make_context(out_dir, resolved, model_path, vector_path, seed);

        auto map = activation_map(w, texts, vec, mo);
        ctx.write("map.csv", map_csv(map, ctx.prov));
        ctx.write("map.svg", map_svg(map, ctx.prov));
        std::cout << "wrote " << (fs::path(out_dir) / "map.csv").string() << "\n";
        return kExitOk;
    }

    if (cmd_top->parsed()) {
        auto w = load_weights(model_path);
        auto records = load_records(data_path);
        auto vec = load_vector(vector_path);
        auto texts = texts_from_records(records, which);
        auto top = top_activating_texts(w, texts, vec, layer, k_texts,
                                        CapturePoint::block_output, n_threads);
        auto print_list = [&](const char* label, const std::vector<ScoredText>& list) {
            std::cout << label << "\n";
            for (const auto& t : list)
                std::cout << "  " << t.id << " " << format_double(t.mean_projection) << "\n";
        };
        print_list("most positive:", top.most_positive);
        print_list("most negative:", top.most_negative);
        if (!out_dir.empty()) {
            json resolved = {{"cmd", "top-texts"}, {"model", model_path}, {"data", data_path},
                             {"vector", vector_path}, {"layer", layer},   {"k", k_texts},
                             {"which", which},     {"seed", seed}};
            auto ctx = make_context(out_dir, resolved, model_path, vector_path, seed);
            json out;
            for (const char* side : {"most_positive", "most_negative"}) {
                const auto& v =
                    side == std::string("most_positive") ? top.most_positive : top.most_negative;
                json list = json::array();
                for (const auto& t : v)
                    list.push_back({{"id", t.id}, {"mean_projection", t.mean_projection}});
                out[side] = list;
            }
            out["provenance"] = {{"config_hash", ctx.prov.config_hash},
                                 {"model_checksum", ctx.prov.model_checksum},
                                 {"vector_checksum", ctx.prov.vector_checksum},
                                 {"seed", ctx.prov.seed}};
            ctx.write("top_texts.json", out.dump(2) + "\n");
        }
        return kExitOk;
    }

    if (cmd_repl->parsed()) {
        auto w = load_weights(model_path);
        auto vec = load_vector(vector_path);
        ReplConfig rc;
        rc.multiplier = mult;
        if (!layers_spec.empty()) rc.layers = parse_layer_list(layers_spec, w.config().n_layers);
        rc.offset = offset;
        rc.max_new = max_new;
        rc.system_prompt = system_prompt;

        std::ifstream script;
        std::istream* in = &std::cin;
        if (!script_path.empty()) {
            script.open(script_path);
            if (!script) throw DataError("cannot open script: " + script_path);
            in = &script;
        }
        std::ofstream transcript;
        std::ostream* tr = nullptr;
        if (!transcript_path.empty()) {
            transcript.open(transcript_path, std::ios::trunc);
            if (!transcript) throw DataError("cannot open transcript: " + transcript_path);
            tr = &transcript;
        }
        return run_repl(w, vec, rc, *in, std::cout, tr);
    }

    return kExitUsage;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const CLI::ParseError& e) {
        return CLI::App().exit(e) == 0 ? kExitOk : kExitUsage;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
}
