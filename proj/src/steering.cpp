#include "residprobe/steering.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>

#include "residprobe/intervene.hpp"

namespace residprobe {

namespace {
constexpr char kMagic[4] = {'S', 'R', 'V', '1'};
}

void save_vector(const SteeringVector& v, const std::string& path) {
    nlohmann::json header;
    header["n_layers"] = v.n_layers;
    header["d_model"] = v.d_model;
    header["K"] = v.k_window;
    header["token_slot"] = v.token_slot;
    header["normalized"] = v.normalized;
    header["provenance"] = v.provenance;
    const std::string text = header.dump();

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot open for writing: " + path);
    f.write(kMagic, 4);
    const uint32_t hlen = static_cast<uint32_t>(text.size());
    unsigned char len_bytes[4] = {
        static_cast<unsigned char>(hlen & 0xff),
        static_cast<unsigned char>((hlen >> 8) & 0xff),
        static_cast<unsigned char>((hlen >> 16) & 0xff),
        static_cast<unsigned char>((hlen >> 24) & 0xff),
    };
    f.write(reinterpret_cast<const char*>(len_bytes), 4);
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& layer : v.layers) {
        if (static_cast<int>(layer.size()) != v.d_model)
            throw DataError("steering vector layer size does not match d_model");
        f.write(reinterpret_cast<const char*>(layer.data()),
                static_cast<std::streamsize>(layer.size() * sizeof(float)));
    }
    if (!f) throw DataError("short write: " + path);
}

SteeringVector load_vector(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open: " + path);
    char magic[4];
    if (!f.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw IoError(IoError::Kind::bad_magic, "bad magic in vector file: " + path);
    unsigned char len_bytes[4];
    if (!f.read(reinterpret_cast<char*>(len_bytes), 4))
        throw IoError(IoError::Kind::truncated, "truncated vector header length: " + path);
    const uint32_t hlen = static_cast<uint32_t>(len_bytes[0]) |
                          (static_cast<uint32_t>(len_bytes[1]) << 8) |
                          (static_cast<uint32_t>(len_bytes[2]) << 16) |
                          (static_cast<uint32_t>(len_bytes[3]) << 24);
    std::string text(hlen, '\0');
    if (!f.read(text.data(), hlen))
        throw IoError(IoError::Kind::truncated, "truncated vector header: " + path);

    SteeringVector v;
    try {
        nlohmann::json header = nlohmann::json::parse(text);
        v.n_layers = header.at("n_layers").get<int>();
        v.d_model = header.at("d_model").get<int>();
        v.k_window = header.at("K").get<int>();
        v.token_slot = header.at("token_slot").get<int>();
        v.normalized = header.at("normalized").get<bool>();
        v.provenance = header.at("provenance").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw IoError(IoError::Kind::malformed, std::string("malformed vector header: ") + e.what());
    }
    if (v.n_layers < 1 || v.d_model < 1)
        throw IoError(IoError::Kind::shape_mismatch, "vector header dimensions invalid");
    v.layers.assign(static_cast<size_t>(v.n_layers),
                    std::vector<float>(static_cast<size_t>(v.d_model)));
    for (auto& layer : v.layers)
        if (!f.read(reinterpret_cast<char*>(layer.data()),
                    static_cast<std::streamsize>(layer.size() * sizeof(float))))
            throw IoError(IoError::Kind::truncated, "truncated vector payload: " + path);
    return v;
}

double cosine_similarity(const std::vector<float>& a, const std::vector<float>& b) {
    if (a.size() != b.size()) throw UsageError("cosine: dimension mismatch");
    const double na = vec_norm(a);
    const double nb = vec_norm(b);
    if (na < 1e-12 || nb < 1e-12) throw UsageError("cosine: zero vector input");
    return vec_dot(a, b) / (na * nb);
}

double cosine_similarity(const SteeringVector& a, const SteeringVector& b, int layer) {
    return cosine_similarity(a.layer(layer), b.layer(layer));
}

SteeringVector project_out_nuisance(const SteeringVector& v, const NuisanceVector& n) {
    if (v.n_layers != n.n_layers || v.d_model != n.d_model)
        throw UsageError("project_out_nuisance: layer/dimension mismatch");
    SteeringVector out = v;
    for (int l = 0; l < v.n_layers; ++l) {
        auto& vl = out.layers[static_cast<size_t>(l)];
        const auto& nl = n.layers[static_cast<size_t>(l)];
        const double proj = vec_dot(vl, nl);
        for (size_t i = 0; i < vl.size(); ++i)
            vl[i] -= static_cast<float>(proj * nl[i]);
        vec_normalize(vl, l, v.token_slot);
    }
    out.normalized = true;
    return out;
}

SteeringVector average_vectors(const SteeringVector& a, const SteeringVector& b) {
    if (a.n_layers != b.n_layers || a.d_model != b.d_model)
        throw UsageError("average_vectors: layer/dimension mismatch");
    SteeringVector out = a;
    out.provenance = "average";
    for (int l = 0; l < a.n_layers; ++l) {
        auto& ol = out.layers[static_cast<size_t>(l)];
        const auto& bl = b.layers[static_cast<size_t>(l)];
        for (size_t i = 0; i < ol.size(); ++i) ol[i] = 0.5f * (ol[i] + bl[i]);
        vec_normalize(ol, l, out.token_slot);
    }
    out.normalized = true;
    return out;
}

} // namespace residprobe
