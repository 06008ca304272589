#include "repl.hpp"

#include <iostream>
#include <sstream>

#include "residprobe/model.hpp"
#include "residprobe/prompts.hpp"

namespace residprobe {

namespace {

const char* kHelp =
    "commands:\n"
    "  :mult X        steering multiplier (default 4)\n"
    "  :layer L[,L2]  steered layer list\n"
    "  :offset K      steered token offset, resolved against the growing sequence\n"
    "  :maxnew N      tokens to generate per condition\n"
    "  :point input|output   edit at block input or block output\n"
    "  :system TEXT   system prompt ('-' clears it)\n"
    "  :help          this text\n"
    "  :quit          leave\n"
    "any other line is a prompt; it generates four continuations\n"
    "(original / positive / negative / zeroed).\n";

std::string layers_string(const std::vector<int>& layers) {
    std::string s = "[";
    for (size_t i = 0; i < layers.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(layers[i]);
    }
    return s + "]";
}

std::string trim_copy(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

} // namespace

int run_repl(const WeightSet& w, const SteeringVector& vec, ReplConfig cfg, std::istream& in,
             std::ostream& out, std::ostream* transcript) {
    if (cfg.layers.empty()) cfg.layers = {std::min(16, w.config().n_layers - 1)};

    auto emit = [&](const std::string& text) {
        out << text;
        if (transcript) *transcript << text;
    };

    auto generate_with = [&](const std::vector<int>& prompt,
                             const std::vector<InterventionSpec>& edits) {
        GenerateOptions opts;
        opts.max_new = cfg.max_new;
        opts.temperature = 0.0f;
        auto toks = generate(w, prompt, opts, edits);
        // Trim the trailing end-of-turn marker from the display.
        if (!toks.empty() && toks.back() == TOK_EOT) toks.pop_back();
        return Tokenizer::decode(toks);
    };

    std::string line;
    while (std::getline(in, line)) {
        if (transcript) *transcript << line << "\n";
        const std::string stripped = trim_copy(line);
        if (stripped.empty()) continue;
        if (stripped[0] == ':') {
            std::istringstream cmd(stripped.substr(1));
            std::string name;
            cmd >> name;
            try {
                if (name == "quit" || name == "q") {
                    break;
                } else if (name == "help") {
                    emit(kHelp);
                } else if (name == "mult") {
                    double v;
                    if (!(cmd >> v)) throw UsageError(":mult needs a number");
                    cfg.multiplier = v;
                } else if (name == "layer") {
                    std::string spec;
                    if (!(cmd >> spec)) throw UsageError(":layer needs a layer list");
                    std::vector<int> layers;
                    std::istringstream ls(spec);
                    std::string part;
                    while (std::getline(ls, part, ',')) layers.push_back(std::stoi(part));
                    for (int l : layers)
                        if (l < 0 || l >= w.config().n_layers)
                            throw UsageError("layer out of range: " + std::to_string(l));
                    cfg.layers = layers;
                } else if (name == "offset") {
                    int v;
                    if (!(cmd >> v)) throw UsageError(":offset needs an integer");
                    cfg.offset = v;
                } else if (name == "maxnew") {
                    int v;
                    if (!(cmd >> v) || v < 1) throw UsageError(":maxnew needs a positive integer");
                    cfg.max_new = v;
                } else if (name == "point") {
                    std::string v;
                    cmd >> v;
                    if (v == "input") cfg.point = CapturePoint::block_input;
                    else if (v == "output") cfg.point = CapturePoint::block_output;
                    else throw UsageError(":point needs 'input' or 'output'");
                } else if (name == "system") {
                    std::string rest;
                    std::getline(cmd, rest);
                    rest = trim_copy(rest);
                    cfg.system_prompt = rest == "-" ? std::string{} : rest;
                } else {
                    throw UsageError("unknown command :" + name);
                }
            } catch (const std::exception& e) {
                emit(std::string("error: ") + e.what() + "\n");
                emit(kHelp);
            }
            continue;
        }

        try {
            PromptBuilder b;
            if (!cfg.system_prompt.empty()) b.add_system(cfg.system_prompt);
            b.begin_user();
            b.add_text(stripped);
            PromptInfo prompt = b.finish();

            auto edit = [&](EditKind kind, float mult) {
                InterventionSpec e;
                e.kind = kind;
                e.layers = cfg.layers;
                e.positions = PositionSelector::at_offset(cfg.offset);
                e.direction = vec.layers;
                e.multiplier = mult;
                e.point = cfg.point;
                return std::vector<InterventionSpec>{e};
            };

            emit("Steer token offset = " + std::to_string(cfg.offset) +
                 ", layers = " + layers_string(cfg.layers) +
                 ", mult = " + format_double(cfg.multiplier) + "\n");
            emit("Original Output: " + generate_with(prompt.tokens, {}) + "\n");
            emit("Pos output: " +
                 generate_with(prompt.tokens,
                               edit(EditKind::add, static_cast<float>(cfg.multiplier))) +
                 "\n");
            emit("Neg output: " +
                 generate_with(prompt.tokens,
                               edit(EditKind::add, static_cast<float>(-cfg.multiplier))) +
                 "\n");
            emit("Zeroedout output: " + generate_with(prompt.tokens, edit(EditKind::zero, 0.0f)) +
                 "\n");
        } catch (const std::exception& e) {
            emit(std::string("error: ") + e.what() + "\n");
        }
    }
    return 0;
}

} // namespace residprobe
