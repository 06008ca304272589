#pragma once

#include <string>
#include <vector>

#include "residprobe/analysis.hpp"
#include "residprobe/paradigms.hpp"

namespace residprobe {

// Reproducibility stamp embedded in every output artifact.
struct Provenance {
    std::string config_hash;
    std::string model_checksum;
    std::string vector_checksum;
    uint64_t seed = 0;
};

std::string provenance_comment(const Provenance& p); // "# key=value" lines

void write_text_file(const std::string& path, const std::string& content);

std::string trials_csv(const std::vector<TrialRecord>& trials, const Provenance& p);
std::string report_json(const EvalReport& r, const Provenance& p);

std::string grid_csv(const EffectivenessGrid& g, const Provenance& p);
std::string grid_json(const EffectivenessGrid& g, const Provenance& p);

std::string map_csv(const ActivationMap& m, const Provenance& p);

// Standalone SVG heatmap: 16px cells, 12-step diverging palette symmetric
// around zero, labels embedded as text elements.
std::string heatmap_svg(const std::vector<std::vector<double>>& rows,
                        const std::vector<std::string>& row_labels,
                        const std::vector<std::string>& col_labels, const std::string& title,
                        const Provenance& p);

std::string grid_svg(const EffectivenessGrid& g, const Provenance& p);
std::string map_svg(const ActivationMap& m, const Provenance& p);

} // namespace residprobe
