#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "residprobe/model.hpp"
#include "residprobe/synthetic.hpp"
#include "residprobe/tokenizer.hpp"
#include "residprobe/weights.hpp"

using namespace residprobe;

namespace {

ModelConfig tiny_config(uint64_t seed = 7) {
    ModelConfig c;
    c.n_layers = 2;
    c.d_model = 16;
    c.n_heads = 2;
    c.d_ff = 32;
    c.vocab_size = kMinVocab;
    c.max_seq_len = 64;
    c.seed = seed;
    return c;
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

// Zero-weight model whose next-token distribution depends only on the current
// token: one-hot embeddings feed straight into a crafted unembedding.
WeightSet lookup_model(const std::vector<std::vector<float>>& logit_rows) {
    ModelConfig c;
    c.n_layers = 1;
    c.n_heads = 2;
    c.d_ff = 8;
    c.d_model = kMinVocab;
    c.vocab_size = kMinVocab;
    c.max_seq_len = 64;
    c.seed = 0;
    std::vector<Tensor> tensors;
    for (const auto& [name, shape] : WeightSet::manifest(c)) {
        Tensor t;
        t.name = name;
        t.shape = shape;
        size_t n = 1;
        for (int d : shape) n *= static_cast<size_t>(d);
        t.data.assign(n, name.find("norm") != std::string::npos ? 1.0f : 0.0f);
        tensors.push_back(std::move(t));
    }
    WeightSet w(c, std::move(tensors));
    auto& emb = w.tensor("tok_emb").data;
    for (int tok = 0; tok < c.vocab_size; ++tok)
        emb[static_cast<size_t>(tok) * c.d_model + tok] = 1.0f;
    auto& un = w.tensor("unembed").data;
    // One-hot rows pass through the RMS norm with this exact scale.
    const float normed = 1.0f / std::sqrt(1.0f / static_cast<float>(c.d_model) + c.norm_epsilon);
    for (int tok = 0; tok < c.vocab_size && tok < static_cast<int>(logit_rows.size()); ++tok)
        for (int out = 0; out < c.vocab_size; ++out)
            un[static_cast<size_t>(tok) * c.vocab_size + out] =
                logit_rows[static_cast<size_t>(tok)][static_cast<size_t>(out)] / normed;
    return w;
}

} // namespace

TEST_CASE("tokenizer maps bytes and specials") {
    auto ids = Tokenizer::encode("AB");
    REQUIRE(ids.size() == 2);
    CHECK(ids[0] == 73);
    CHECK(ids[1] == 74);
    CHECK(Tokenizer::encode("").empty());

    auto special = Tokenizer::encode("<|eot_id|>");
    REQUIRE(special.size() == 1);
    CHECK(special[0] == TOK_EOT);

    auto mixed = Tokenizer::encode("a<|start_header_id|>b");
    REQUIRE(mixed.size() == 3);
    CHECK(mixed[1] == TOK_START_HEADER);
}

TEST_CASE("tokenizer round-trips arbitrary byte strings") {
    DetRng rng(42);
    for (int trial = 0; trial < 1000; ++trial) {
        const size_t len = rng.next_u64() % 64;
        std::string s;
        for (size_t i = 0; i < len; ++i)
            s.push_back(static_cast<char>(rng.next_u64() & 0xff));
        CHECK(Tokenizer::decode(Tokenizer::encode(s)) == s);
    }
    // Strings containing special literals survive as well.
    const std::string tricky = "x<|eot_id|>y<|begin_of_text|><|pad";
    CHECK(Tokenizer::decode(Tokenizer::encode(tricky)) == tricky);
}

TEST_CASE("init_model is seed-deterministic") {
    auto a = init_model(tiny_config(7));
    auto b = init_model(tiny_config(7));
    CHECK(a.same_bytes(b));
    auto c = init_model(tiny_config(8));
    CHECK_FALSE(a.same_bytes(c));
}

TEST_CASE("init_model rejects invalid configs") {
    ModelConfig c = tiny_config();
    c.d_model = 15; // not divisible by n_heads
    CHECK_THROWS_AS(init_model(c), UsageError);
    c = tiny_config();
    c.vocab_size = 100;
    CHECK_THROWS_AS(init_model(c), UsageError);
}

TEST_CASE("weight files round-trip bit-exactly") {
    const std::string path = temp_path("rp_weights_test.bin");
    auto w = init_model(tiny_config(21));
    save_weights(w, path);
    auto loaded = load_weights(path);
    CHECK(loaded.same_bytes(w));
    CHECK(loaded.config() == w.config());
    std::filesystem::remove(path);
}

TEST_CASE("weight loader distinguishes error kinds") {
    const std::string path = temp_path("rp_weights_bad.bin");
    auto w = init_model(tiny_config(3));
    save_weights(w, path);

    SUBCASE("bad magic") {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(0);
        f.write("XXXX", 4);
        f.close();
        try {
            load_weights(path);
            FAIL("expected bad magic");
        } catch (const IoError& e) {
            CHECK(e.kind == IoError::Kind::bad_magic);
        }
    }
    SUBCASE("truncated payload") {
        std::filesystem::resize_file(path, std::filesystem::file_size(path) - 64);
        try {
            load_weights(path);
            FAIL("expected truncation");
        } catch (const IoError& e) {
            CHECK(e.kind == IoError::Kind::truncated);
        }
    }
    SUBCASE("shape mismatch") {
        // Rewrite with a header whose manifest disagrees with its config.
        std::ifstream in(path, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), {});
        in.close();
        const std::string needle = "\"tok_emb\"";
        auto pos = bytes.find(needle);
        REQUIRE(pos != std::string::npos);
        bytes.replace(pos, needle.size(), "\"tok_amb\"");
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.close();
        try {
            load_weights(path);
            FAIL("expected shape mismatch");
        } catch (const IoError& e) {
            CHECK(e.kind == IoError::Kind::shape_mismatch);
        }
    }
    std::filesystem::remove(path);
}

TEST_CASE("forward: softmax normalization and determinism") {
    auto w = init_model(tiny_config(11));
    auto tokens = Tokenizer::encode("hello world");
    auto a = forward(w, tokens);
    auto b = forward(w, tokens);
    REQUIRE(a.dists.size() == tokens.size());
    for (size_t pos = 0; pos < a.dists.size(); ++pos) {
        double sum = 0.0;
        for (float lp : a.dists[pos].log_probs) sum += std::exp(static_cast<double>(lp));
        CHECK(std::abs(sum - 1.0) < 1e-6);
        CHECK(a.dists[pos].logits == b.dists[pos].logits);
    }
}

TEST_CASE("forward: causality is exact") {
    auto w = init_model(tiny_config(13));
    auto tokens = Tokenizer::encode("abcdefgh");
    auto base = forward(w, tokens);
    for (size_t t = 1; t < tokens.size(); t += 3) {
        auto perturbed = tokens;
        perturbed[t] = Tokenizer::byte_token('Z');
        auto fr = forward(w, perturbed);
        for (size_t pos = 0; pos < t; ++pos)
            CHECK(fr.dists[pos].logits == base.dists[pos].logits);
        CHECK(fr.dists[t].logits != base.dists[t].logits);
    }
}

TEST_CASE("forward: residual-only path with zeroed output projections") {
    auto w = init_model(tiny_config(17));
    for (int l = 0; l < w.config().n_layers; ++l) {
        auto& wo = w.tensor("l" + std::to_string(l) + ".wo").data;
        std::fill(wo.begin(), wo.end(), 0.0f);
        auto& wd = w.tensor("l" + std::to_string(l) + ".wd").data;
        std::fill(wd.begin(), wd.end(), 0.0f);
    }
    auto tokens = Tokenizer::encode("abab");
    auto fr = forward(w, tokens);
    // Same token, different positions: identical logits.
    CHECK(fr.dists[0].logits == fr.dists[2].logits);
    CHECK(fr.dists[1].logits == fr.dists[3].logits);

    // And they equal the direct embed -> final_norm -> unembed readout.
    const auto& cfg = w.config();
    const auto emb = w.span("tok_emb");
    const auto norm_w = w.span("final_norm");
    const auto unembed = w.span("unembed");
    const int d = cfg.d_model;
    for (size_t pos = 0; pos < tokens.size(); ++pos) {
        const float* row = emb.data() + static_cast<size_t>(tokens[pos]) * d;
        double ss = 0.0;
        for (int i = 0; i < d; ++i) ss += static_cast<double>(row[i]) * row[i];
        const float inv =
            static_cast<float>(1.0 / std::sqrt(ss / d + static_cast<double>(cfg.norm_epsilon)));
        for (int t = 0; t < cfg.vocab_size; t += 37) {
            float expect = 0.0f;
            for (int i = 0; i < d; ++i) {
                const float normed = row[i] * inv * norm_w[static_cast<size_t>(i)];
                if (normed != 0.0f)
                    expect += normed * unembed[static_cast<size_t>(i) * cfg.vocab_size + t];
            }
            CHECK(fr.dists[pos].logits[static_cast<size_t>(t)] ==
                  doctest::Approx(expect).epsilon(1e-5));
        }
    }
}

TEST_CASE("forward rejects bad inputs") {
    auto w = init_model(tiny_config(19));
    CHECK_THROWS_AS(forward(w, std::vector<int>{}), UsageError);
    std::vector<int> too_long(static_cast<size_t>(w.config().max_seq_len) + 1,
                              Tokenizer::byte_token('a'));
    CHECK_THROWS_AS(forward(w, too_long), DataError);
    std::vector<int> bad_token = {9999};
    CHECK_THROWS_AS(forward(w, bad_token), DataError);
}

TEST_CASE("generate: greedy determinism and temperature-zero equivalence") {
    auto w = init_model(tiny_config(23));
    auto prompt = Tokenizer::encode("once upon");
    GenerateOptions greedy;
    greedy.max_new = 8;
    auto a = generate(w, prompt, greedy);
    auto b = generate(w, prompt, greedy);
    CHECK(a == b);

    GenerateOptions tau0 = greedy;
    tau0.temperature = 0.0f;
    tau0.seed = 99;
    CHECK(generate(w, prompt, tau0) == a);

    GenerateOptions sampled = greedy;
    sampled.temperature = 0.8f;
    sampled.seed = 5;
    CHECK(generate(w, prompt, sampled) == generate(w, prompt, sampled));

    CHECK_THROWS_AS(generate(w, prompt, GenerateOptions{.max_new = 0}), UsageError);
    CHECK_THROWS_AS(generate(w, std::vector<int>{}, greedy), UsageError);
}

TEST_CASE("generate equals iterated forward with re-resolved offsets") {
    PlantParams pp;
    auto planted = make_planted_model(pp);
    auto prompt = Tokenizer::encode("steering probe ~~~ text");

    InterventionSpec edit;
    edit.kind = EditKind::add;
    edit.layers = {pp.planted_layer()};
    edit.positions = PositionSelector::at_offset(-2);
    edit.direction = {planted.direction};
    edit.multiplier = 3.0f;

    GenerateOptions opts;
    opts.max_new = 4;
    opts.stop_at_eot = false;
    auto generated = generate(planted.weights, prompt, opts, {edit});

    // Replay step by step: at every step the edit must land on the position
    // two before the next generated token.
    std::vector<int> seq = prompt;
    for (int tok : generated) {
        const int seq_len = static_cast<int>(seq.size());
        auto resolved = resolve_positions(edit.positions, seq_len);
        REQUIRE(resolved.size() == 1);
        CHECK(resolved[0] == seq_len - 2);

        CaptureSpec cap;
        cap.layers = {pp.planted_layer()};
        cap.positions = PositionSelector::at_offset(-2);
        auto baseline = forward(planted.weights, seq, cap);
        auto steered = forward(planted.weights, seq, cap, {edit});
        auto base_row = baseline.tape->at(pp.planted_layer(), seq_len - 2);
        auto steer_row = steered.tape->at(pp.planted_layer(), seq_len - 2);
        for (int i = 0; i < planted.weights.config().d_model; ++i) {
            const float expected =
                base_row[static_cast<size_t>(i)] +
                3.0f * planted.direction[static_cast<size_t>(i)];
            CHECK(steer_row[static_cast<size_t>(i)] == doctest::Approx(expected).epsilon(1e-6));
        }

        CHECK(steered.dists.back().argmax() == tok);
        seq.push_back(tok);
    }
}

TEST_CASE("sequence_log_prob: perplexity oracles") {
    SUBCASE("uniform logits give perplexity = vocab size") {
        auto w = init_model(tiny_config(29));
        auto& un = w.tensor("unembed").data;
        std::fill(un.begin(), un.end(), 0.0f);
        auto tokens = Tokenizer::encode("some text here");
        auto out = sequence_log_prob(w, tokens);
        CHECK(out.perplexity == doctest::Approx(kMinVocab).epsilon(1e-5));
    }

    SUBCASE("crafted per-token probabilities") {
        // After token a: P(b) = 0.5; after b: P(c) = 0.125.
        const int a = Tokenizer::byte_token('a');
        const int b = Tokenizer::byte_token('b');
        const int c = Tokenizer::byte_token('c');
        std::vector<std::vector<float>> rows(kMinVocab,
                                             std::vector<float>(kMinVocab, 0.0f));
        const double rest_b = 0.5 / (kMinVocab - 1);
        const double rest_c = 0.875 / (kMinVocab - 1);
        for (int t = 0; t < kMinVocab; ++t) {
            rows[static_cast<size_t>(a)][static_cast<size_t>(t)] =
                static_cast<float>(std::log(t == b ? 0.5 : rest_b));
            rows[static_cast<size_t>(b)][static_cast<size_t>(t)] =
                static_cast<float>(std::log(t == c ? 0.125 : rest_c));
        }
        auto w = lookup_model(rows);
        std::vector<int> tokens = {a, b, c};
        auto out = sequence_log_prob(w, tokens);
        CHECK(out.perplexity == doctest::Approx(4.0).epsilon(1e-4));
    }

    SUBCASE("deterministic next token gives perplexity 1") {
        const int a = Tokenizer::byte_token('a');
        const int b = Tokenizer::byte_token('b');
        std::vector<std::vector<float>> rows(kMinVocab,
                                             std::vector<float>(kMinVocab, 0.0f));
        for (int t = 0; t < kMinVocab; ++t)
            rows[static_cast<size_t>(a)][static_cast<size_t>(t)] = t == b ? 40.0f : -40.0f;
        auto w = lookup_model(rows);
        std::vector<int> tokens = {a, b};
        auto out = sequence_log_prob(w, tokens);
        CHECK(out.perplexity == doctest::Approx(1.0).epsilon(1e-4));
    }

    SUBCASE("single token is an error") {
        auto w = init_model(tiny_config(31));
        std::vector<int> one = {TOK_BOS};
        CHECK_THROWS_AS(sequence_log_prob(w, one), UsageError);
    }
}

TEST_CASE("sequence_log_prob matches position-by-position re-forward") {
    auto w = init_model(tiny_config(37));
    auto tokens = Tokenizer::encode("independent oracle");
    auto out = sequence_log_prob(w, tokens);
    double total = 0.0;
    for (size_t t = 1; t < tokens.size(); ++t) {
        std::vector<int> prefix(tokens.begin(), tokens.begin() + static_cast<long>(t));
        auto fr = forward(w, prefix);
        total += fr.dists.back().log_prob(tokens[t]);
    }
    const double naive = std::exp(-total / static_cast<double>(tokens.size() - 1));
    CHECK(std::abs(out.perplexity - naive) / naive < 1e-5);
}
