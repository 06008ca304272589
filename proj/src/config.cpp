#include "residprobe/config.hpp"

#include <nlohmann/json.hpp>

namespace residprobe {

std::string config_to_json(const ModelConfig& c) {
    nlohmann::json j;
    j["n_layers"] = c.n_layers;
    j["d_model"] = c.d_model;
    j["n_heads"] = c.n_heads;
    j["d_ff"] = c.d_ff;
    j["vocab_size"] = c.vocab_size;
    j["max_seq_len"] = c.max_seq_len;
    j["norm_epsilon"] = c.norm_epsilon;
    j["seed"] = c.seed;
    return j.dump();
}

ModelConfig config_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    ModelConfig c;
    c.n_layers = j.at("n_layers").get<int>();
    c.d_model = j.at("d_model").get<int>();
    c.n_heads = j.at("n_heads").get<int>();
    c.d_ff = j.at("d_ff").get<int>();
    c.vocab_size = j.at("vocab_size").get<int>();
    c.max_seq_len = j.at("max_seq_len").get<int>();
    c.norm_epsilon = j.at("norm_epsilon").get<float>();
    c.seed = j.at("seed").get<uint64_t>();
    return c;
}

} // namespace residprobe
