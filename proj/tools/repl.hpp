#pragma once

#include <iosfwd>
#include <string>

#include "residprobe/intervene.hpp"
#include "residprobe/steering.hpp"
#include "residprobe/weights.hpp"

namespace residprobe {

struct ReplConfig {
    double multiplier = 4.0;
    std::vector<int> layers;
    int offset = -2;
    int max_new = 48;
    CapturePoint point = CapturePoint::block_output;
    std::string system_prompt;
};

// Interactive steering exploration: each prompt line generates four greedy
// continuations (original, positive, negative, zeroed). Commands start with
// ':'. Everything read and produced is mirrored to `transcript`.
int run_repl(const WeightSet& w, const SteeringVector& vec, ReplConfig cfg, std::istream& in,
             std::ostream& out, std::ostream* transcript);

} // namespace residprobe
