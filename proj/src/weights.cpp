#include "residprobe/weights.hpp"

#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>

namespace residprobe {

namespace {

constexpr char kMagic[4] = {'T', 'L', 'M', '1'};

std::string layer_name(int i, const char* suffix) {
    return "l" + std::to_string(i) + "." + suffix;
}

} // namespace

WeightSet::WeightSet(ModelConfig config, std::vector<Tensor> tensors)
    : config_(std::move(config)), tensors_(std::move(tensors)) {
    config_.validate();
    auto expect = manifest(config_);
    if (expect.size() != tensors_.size())
        throw IoError(IoError::Kind::shape_mismatch,
                      "weights: tensor count mismatch: expected " + std::to_string(expect.size()) +
                          ", got " + std::to_string(tensors_.size()));
    for (size_t i = 0; i < expect.size(); ++i) {
        if (tensors_[i].name != expect[i].first || tensors_[i].shape != expect[i].second)
            throw IoError(IoError::Kind::shape_mismatch,
                          "weights: tensor '" + tensors_[i].name + "' does not match manifest entry '" +
                              expect[i].first + "'");
        size_t n = 1;
        for (int d : expect[i].second) n *= static_cast<size_t>(d);
        if (tensors_[i].data.size() != n)
            throw IoError(IoError::Kind::shape_mismatch,
                          "weights: tensor '" + tensors_[i].name + "' payload size mismatch");
    }
}

const Tensor& WeightSet::tensor(const std::string& name) const {
    for (const auto& t : tensors_)
        if (t.name == name) return t;
    throw DataError("weights: unknown tensor '" + name + "'");
}

Tensor& WeightSet::tensor(const std::string& name) {
    for (auto& t : tensors_)
        if (t.name == name) return t;
    throw DataError("weights: unknown tensor '" + name + "'");
}

std::vector<std::pair<std::string, std::vector<int>>> WeightSet::manifest(const ModelConfig& c) {
    std::vector<std::pair<std::string, std::vector<int>>> m;
    m.emplace_back("tok_emb", std::vector<int>{c.vocab_size, c.d_model});
    m.emplace_back("pos_emb", std::vector<int>{c.max_seq_len, c.d_model});
    for (int i = 0; i < c.n_layers; ++i) {
        m.emplace_back(layer_name(i, "attn_norm"), std::vector<int>{c.d_model});
        m.emplace_back(layer_name(i, "wq"), std::vector<int>{c.d_model, c.d_model});
        m.emplace_back(layer_name(i, "wk"), std::vector<int>{c.d_model, c.d_model});
        m.emplace_back(layer_name(i, "wv"), std::vector<int>{c.d_model, c.d_model});
        m.emplace_back(layer_name(i, "wo"), std::vector<int>{c.d_model, c.d_model});
        m.emplace_back(layer_name(i, "mlp_norm"), std::vector<int>{c.d_model});
        m.emplace_back(layer_name(i, "wg"), std::vector<int>{c.d_model, c.d_ff});
        m.emplace_back(layer_name(i, "wu"), std::vector<int>{c.d_model, c.d_ff});
        m.emplace_back(layer_name(i, "wd"), std::vector<int>{c.d_ff, c.d_model});
    }
    m.emplace_back("final_norm", std::vector<int>{c.d_model});
    m.emplace_back("unembed", std::vector<int>{c.d_model, c.vocab_size});
    return m;
}

bool WeightSet::same_bytes(const WeightSet& other) const {
    if (tensors_.size() != other.tensors_.size()) return false;
    for (size_t i = 0; i < tensors_.size(); ++i) {
        const auto& a = tensors_[i];
        const auto& b = other.tensors_[i];
        if (a.name != b.name || a.shape != b.shape || a.data.size() != b.data.size()) return false;
        if (!a.data.empty() &&
            std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(float)) != 0)
            return false;
    }
    return true;
}

WeightSet init_model(const ModelConfig& config) {
    config.validate();
    DetRng rng(config.seed);
    std::vector<Tensor> tensors;
    for (const auto& [name, shape] : WeightSet::manifest(config)) {
        Tensor t;
        t.name = name;
        t.shape = shape;
        size_t n = 1;
        for (int d : shape) n *= static_cast<size_t>(d);
        t.data.resize(n);
        const bool is_norm = name.find("norm") != std::string::npos;
        if (is_norm) {
            std::fill(t.data.begin(), t.data.end(), 1.0f);
        } else {
            for (auto& v : t.data) v = static_cast<float>(rng.next_normal() * 0.02);
        }
        tensors.push_back(std::move(t));
    }
    return WeightSet(config, std::move(tensors));
}

void save_weights(const WeightSet& w, const std::string& path) {
    nlohmann::json header;
    header["config"] = nlohmann::json::parse(config_to_json(w.config()));
    nlohmann::json manifest = nlohmann::json::array();
    uint64_t offset = 0;
    for (const auto& t : w.tensors()) {
        nlohmann::json entry;
        entry["name"] = t.name;
        entry["shape"] = t.shape;
        entry["offset"] = offset;
        manifest.push_back(entry);
        offset += t.data.size() * sizeof(float);
    }
    header["tensors"] = manifest;
    const std::string header_text = header.dump();

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot open for writing: " + path);
    f.write(kMagic, 4);
    const uint32_t hlen = static_cast<uint32_t>(header_text.size());
    unsigned char len_bytes[4] = {
        static_cast<unsigned char>(hlen & 0xff),
        static_cast<unsigned char>((hlen >> 8) & 0xff),
        static_cast<unsigned char>((hlen >> 16) & 0xff),
        static_cast<unsigned char>((hlen >> 24) & 0xff),
    };
    f.write(reinterpret_cast<const char*>(len_bytes), 4);
    f.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
    // Payload is little-endian f32; this targets little-endian hosts directly.
    for (const auto& t : w.tensors())
        f.write(reinterpret_cast<const char*>(t.data.data()),
                static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    if (!f) throw DataError("short write: " + path);
}

WeightSet load_weights(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open: " + path);
    char magic[4];
    if (!f.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw IoError(IoError::Kind::bad_magic, "bad magic in weight file: " + path);
    unsigned char len_bytes[4];
    if (!f.read(reinterpret_cast<char*>(len_bytes), 4))
        throw IoError(IoError::Kind::truncated, "truncated header length: " + path);
    const uint32_t hlen = static_cast<uint32_t>(len_bytes[0]) |
                          (static_cast<uint32_t>(len_bytes[1]) << 8) |
                          (static_cast<uint32_t>(len_bytes[2]) << 16) |
                          (static_cast<uint32_t>(len_bytes[3]) << 24);
    std::string header_text(hlen, '\0');
    if (!f.read(header_text.data(), hlen))
        throw IoError(IoError::Kind::truncated, "truncated header: " + path);

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_text);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(IoError::Kind::malformed, std::string("malformed weight header: ") + e.what());
    }
    ModelConfig config = config_from_json(header.at("config").dump());
    config.validate();

    auto expect = WeightSet::manifest(config);
    const auto& entries = header.at("tensors");
    if (entries.size() != expect.size())
        throw IoError(IoError::Kind::shape_mismatch, "manifest tensor count does not match config");

    std::vector<Tensor> tensors;
    uint64_t offset = 0;
    for (size_t i = 0; i < expect.size(); ++i) {
        const auto& e = entries[i];
        Tensor t;
        t.name = e.at("name").get<std::string>();
        t.shape = e.at("shape").get<std::vector<int>>();
        if (t.name != expect[i].first || t.shape != expect[i].second)
            throw IoError(IoError::Kind::shape_mismatch,
                          "manifest shape mismatch at tensor '" + t.name + "'");
        if (e.at("offset").get<uint64_t>() != offset)
            throw IoError(IoError::Kind::malformed, "non-contiguous tensor offset at '" + t.name + "'");
        t.data.resize(t.numel());
        if (!f.read(reinterpret_cast<char*>(t.data.data()),
                    static_cast<std::streamsize>(t.data.size() * sizeof(float))))
            throw IoError(IoError::Kind::truncated, "truncated payload at tensor '" + t.name + "'");
        offset += t.data.size() * sizeof(float);
        for (float v : t.data)
            if (!std::isfinite(v))
                throw IoError(IoError::Kind::malformed, "non-finite value in tensor '" + t.name + "'");
        tensors.push_back(std::move(t));
    }
    return WeightSet(config, std::move(tensors));
}

uint64_t file_checksum(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open: " + path);
    uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    while (f.read(buf, sizeof(buf)) || f.gcount() > 0) {
        h = fnv1a64(buf, static_cast<size_t>(f.gcount()), h);
        if (f.eof()) break;
    }
    return h;
}

} // namespace residprobe
