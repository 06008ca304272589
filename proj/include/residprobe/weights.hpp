#pragma once

#include <span>
#include <string>
#include <vector>

#include "residprobe/config.hpp"

namespace residprobe {

struct Tensor {
    std::string name;
    std::vector<int> shape;
    std::vector<float> data;

    size_t numel() const {
        size_t n = 1;
        for (int d : shape) n *= static_cast<size_t>(d);
        return n;
    }
};

// Immutable after load/init; shareable across concurrent forward passes.
// Matrices are stored row-major as [in][out]: y[o] = sum_i x[i] * W[i*out+o].
class WeightSet {
  public:
    WeightSet() = default;
    WeightSet(ModelConfig config, std::vector<Tensor> tensors);

    const ModelConfig& config() const { return config_; }

    const Tensor& tensor(const std::string& name) const;
    Tensor& tensor(const std::string& name);
    const std::vector<Tensor>& tensors() const { return tensors_; }

    std::span<const float> span(const std::string& name) const { return tensor(name).data; }

    // Expected tensor manifest for a config, in file order.
    static std::vector<std::pair<std::string, std::vector<int>>> manifest(const ModelConfig& c);

    bool same_bytes(const WeightSet& other) const;

  private:
    ModelConfig config_;
    std::vector<Tensor> tensors_;
    std::vector<int> index_; // name-sorted order is not needed; linear scan cache
};

// Seeded deterministic init: matrices ~ N(0, 0.02), norm weights at 1.
WeightSet init_model(const ModelConfig& config);

// Weight file: magic "TLM1", u32le header length, JSON header
// {config, tensors:[{name, shape, offset}]}, packed f32le payload.
void save_weights(const WeightSet& w, const std::string& path);
WeightSet load_weights(const std::string& path);

uint64_t file_checksum(const std::string& path);

} // namespace residprobe
