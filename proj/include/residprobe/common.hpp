#pragma once

#include <charconv>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace residprobe {

// Error taxonomy. CLI maps these onto exit codes: UsageError -> 1,
// DataError -> 2, anything else -> 3.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Weight/vector file problems, each with a distinct kind.
struct IoError : DataError {
    enum class Kind { bad_magic, shape_mismatch, truncated, malformed };
    Kind kind;
    IoError(Kind k, const std::string& msg) : DataError(msg), kind(k) {}
};

// Normalization of a (near-)zero vector; reports where it happened.
struct DegenerateVectorError : std::runtime_error {
    int layer = -1;
    int slot = -1;
    DegenerateVectorError(const std::string& msg, int layer_, int slot_)
        : std::runtime_error(msg), layer(layer_), slot(slot_) {}
};

inline uint64_t fnv1a64(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline uint64_t fnv1a64(std::string_view s) { return fnv1a64(s.data(), s.size()); }

std::string hex64(uint64_t v);

// Deterministic normal sampler. std::normal_distribution is not pinned by the
// standard, so weight init uses an explicit Box-Muller over mt19937_64 draws.
class DetRng {
  public:
    explicit DetRng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1) with 53-bit resolution.
    double next_uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double next_normal();

  private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Runs fn(i) for i in [0, n). Results must be written to disjoint slots so the
// outcome is identical for any worker count. n_threads <= 1 runs inline.
void parallel_for(size_t n, int n_threads, const std::function<void(size_t)>& fn);

// Worker count resolution: explicit request, capped by RESID_PROBE_THREADS.
int resolve_threads(int requested);

// Shortest round-trip decimal formatting, deterministic across runs.
std::string format_double(double v);
std::string format_float(float v);

} // namespace residprobe
