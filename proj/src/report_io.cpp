#include "residprobe/report_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

namespace residprobe {

namespace {

const char* paradigm_name(Paradigm p) {
    switch (p) {
        case Paradigm::paired: return "paired";
        case Paradigm::individual: return "individual";
        case Paradigm::dummy: return "dummy";
    }
    return "paired";
}

nlohmann::json provenance_json(const Provenance& p) {
    nlohmann::json j;
    j["config_hash"] = p.config_hash;
    j["model_checksum"] = p.model_checksum;
    j["vector_checksum"] = p.vector_checksum;
    j["seed"] = p.seed;
    return j;
}

} // namespace

std::string provenance_comment(const Provenance& p) {
    std::string out;
    out += "# config_hash=" + p.config_hash + "\n";
    out += "# model_checksum=" + p.model_checksum + "\n";
    out += "# vector_checksum=" + p.vector_checksum + "\n";
    out += "# seed=" + std::to_string(p.seed) + "\n";
    return out;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot open for writing: " + path);
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!f) throw DataError("short write: " + path);
}

std::string trials_csv(const std::vector<TrialRecord>& trials, const Provenance& p) {
    std::string out = provenance_comment(p);
    out += "id,paradigm,condition,logp_a,logp_b,chosen_token,correct\n";
    for (const auto& t : trials) {
        std::string condition;
        switch (t.paradigm) {
            case Paradigm::paired:
                condition = t.ordering == PairOrdering::self_first ? "self_first" : "self_second";
                break;
            case Paradigm::individual:
                condition = t.probed_author == ProbeAuthor::self ? "probe_self" : "probe_other";
                break;
            case Paradigm::dummy:
                condition = t.expected_yes ? "has_name" : "no_name";
                break;
        }
        out += t.record_id;
        out += ',';
        out += paradigm_name(t.paradigm);
        out += ',';
        out += condition;
        out += ',';
        out += format_float(t.logp_a);
        out += ',';
        out += format_float(t.logp_b);
        out += ',';
        out += std::to_string(t.chosen_token);
        out += ',';
        out += format_double(t.paradigm == Paradigm::paired ? t.credit
                                                            : (t.claims ? 1.0 : 0.0));
        out += '\n';
    }
    return out;
}

std::string report_json(const EvalReport& r, const Provenance& p) {
    nlohmann::json j;
    j["paradigm"] = paradigm_name(r.paradigm);
    j["context_included"] = r.context_included;
    j["n"] = r.n;
    j["accuracy"] = r.accuracy;
    j["successes"] = r.successes;
    j["ties"] = r.ties;
    j["n_test"] = r.n_test;
    j["p_value"] = r.p_value;
    j["dropped"] = r.dropped;
    j["dropped_ids"] = r.dropped_ids;
    j["degenerate"] = r.degenerate;
    j["claim_rate_self"] = r.claim_rate_self;
    j["claim_rate_other"] = r.claim_rate_other;
    j["yes_rate"] = r.yes_rate;
    if (r.paradigm == Paradigm::dummy) j["accuracy_vs_truth"] = r.accuracy_vs_truth;
    j["provenance"] = provenance_json(p);
    return j.dump(2) + "\n";
}

std::string grid_csv(const EffectivenessGrid& g, const Provenance& p) {
    std::string out = provenance_comment(p);
    out += "layer";
    for (double m : g.multipliers) out += "," + format_double(m);
    out += "\n";
    for (size_t li = 0; li < g.layers.size(); ++li) {
        out += std::to_string(g.layers[li]);
        for (size_t mi = 0; mi < g.multipliers.size(); ++mi)
            out += "," + format_double(g.cell(li, mi).aggregate);
        out += "\n";
    }
    return out;
}

std::string grid_json(const EffectivenessGrid& g, const Provenance& p) {
    nlohmann::json j;
    j["layers"] = g.layers;
    j["multipliers"] = g.multipliers;
    j["baseline"] = {{"claim_self", g.baseline.claim_self},
                     {"claim_other", g.baseline.claim_other},
                     {"deny_self", g.baseline.deny_self},
                     {"deny_other", g.baseline.deny_other}};
    nlohmann::json cells = nlohmann::json::array();
    for (size_t li = 0; li < g.layers.size(); ++li) {
        nlohmann::json row = nlohmann::json::array();
        for (size_t mi = 0; mi < g.multipliers.size(); ++mi) {
            const GridCell& c = g.cell(li, mi);
            nlohmann::json cell;
            cell["aggregate"] = c.aggregate;
            cell["claim_self"] = c.rates.claim_self;
            cell["claim_other"] = c.rates.claim_other;
            cell["deny_self"] = c.rates.deny_self;
            cell["deny_other"] = c.rates.deny_other;
            cell["degenerate"] = c.degenerate;
            cell["saturated"] = {c.saturated[0], c.saturated[1], c.saturated[2], c.saturated[3]};
            row.push_back(cell);
        }
        cells.push_back(row);
    }
    j["cells"] = cells;
    j["provenance"] = provenance_json(p);
    return j.dump(2) + "\n";
}

std::string map_csv(const ActivationMap& m, const Provenance& p) {
    std::string out = provenance_comment(p);
    out += "layer";
    for (int o = 0; o < m.window; ++o) out += "," + std::to_string(o - (m.window - 1));
    out += "\n";
    for (size_t li = 0; li < m.layers.size(); ++li) {
        out += std::to_string(m.layers[li]);
        for (int o = 0; o < m.window; ++o)
            out += "," + format_double(m.values[li * static_cast<size_t>(m.window) +
                                                static_cast<size_t>(o)]);
        out += "\n";
    }
    return out;
}

namespace {

// 12-step diverging palette, low (blue) to high (red).
const char* kPalette[12] = {"#053061", "#2166ac", "#4393c3", "#92c5de", "#d1e5f0", "#f7f7f7",
                            "#fddbc7", "#f4a582", "#d6604d", "#b2182b", "#67001f", "#40001a"};

} // namespace

std::string heatmap_svg(const std::vector<std::vector<double>>& rows,
                        const std::vector<std::string>& row_labels,
                        const std::vector<std::string>& col_labels, const std::string& title,
                        const Provenance& p) {
    if (rows.empty() || rows[0].empty()) throw UsageError("heatmap: empty value matrix");
    const int n_rows = static_cast<int>(rows.size());
    const int n_cols = static_cast<int>(rows[0].size());
    constexpr int kCell = 16;
    constexpr int kLeft = 64;
    constexpr int kTop = 32;
    constexpr int kBottom = 24;

    double vmax = 0.0;
    for (const auto& row : rows)
        for (double v : row)
            if (std::isfinite(v)) vmax = std::max(vmax, std::abs(v));
    if (vmax == 0.0) vmax = 1.0;

    auto color_of = [&](double v) {
        const double t = (v + vmax) / (2.0 * vmax); // [0, 1]
        int idx = static_cast<int>(t * 12.0);
        idx = std::clamp(idx, 0, 11);
        return kPalette[idx];
    };

    const int width = kLeft + n_cols * kCell + 8;
    const int height = kTop + n_rows * kCell + kBottom;
    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
           "\" height=\"" + std::to_string(height) + "\">\n";
    svg += "<!--\n" + provenance_comment(p) + "-->\n";
    svg += "<text x=\"" + std::to_string(kLeft) + "\" y=\"16\" font-family=\"monospace\" "
           "font-size=\"12\">" + title + "</text>\n";
    for (int r = 0; r < n_rows; ++r) {
        for (int c = 0; c < n_cols; ++c) {
            const double v = rows[static_cast<size_t>(r)][static_cast<size_t>(c)];
            svg += "<rect x=\"" + std::to_string(kLeft + c * kCell) + "\" y=\"" +
                   std::to_string(kTop + r * kCell) + "\" width=\"16\" height=\"16\" fill=\"" +
                   (std::isfinite(v) ? color_of(v) : "#999999") + "\"><title>" + format_double(v) +
                   "</title></rect>\n";
        }
        svg += "<text x=\"" + std::to_string(kLeft - 6) + "\" y=\"" +
               std::to_string(kTop + r * kCell + 12) +
               "\" text-anchor=\"end\" font-family=\"monospace\" font-size=\"10\">" +
               row_labels.at(static_cast<size_t>(r)) + "</text>\n";
    }
    const int label_stride = std::max(1, n_cols / 16);
    for (int c = 0; c < n_cols; c += label_stride) {
        svg += "<text x=\"" + std::to_string(kLeft + c * kCell + 8) + "\" y=\"" +
               std::to_string(kTop + n_rows * kCell + 14) +
               "\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"9\">" +
               col_labels.at(static_cast<size_t>(c)) + "</text>\n";
    }
    svg += "</svg>\n";
    return svg;
}

std::string grid_svg(const EffectivenessGrid& g, const Provenance& p) {
    std::vector<std::vector<double>> rows(g.layers.size(),
                                          std::vector<double>(g.multipliers.size(), 0.0));
    std::vector<std::string> row_labels, col_labels;
    for (size_t li = 0; li < g.layers.size(); ++li) {
        row_labels.push_back("L" + std::to_string(g.layers[li]));
        for (size_t mi = 0; mi < g.multipliers.size(); ++mi)
            rows[li][mi] = g.cell(li, mi).aggregate;
    }
    for (double m : g.multipliers) col_labels.push_back(format_double(m));
    return heatmap_svg(rows, row_labels, col_labels, "steering effectiveness", p);
}

std::string map_svg(const ActivationMap& m, const Provenance& p) {
    std::vector<std::vector<double>> rows(m.layers.size(),
                                          std::vector<double>(static_cast<size_t>(m.window)));
    std::vector<std::string> row_labels, col_labels;
    for (size_t li = 0; li < m.layers.size(); ++li) {
        row_labels.push_back("L" + std::to_string(m.layers[li]));
        for (int o = 0; o < m.window; ++o)
            rows[li][static_cast<size_t>(o)] =
                m.values[li * static_cast<size_t>(m.window) + static_cast<size_t>(o)];
    }
    for (int o = 0; o < m.window; ++o) col_labels.push_back(std::to_string(o - (m.window - 1)));
    return heatmap_svg(rows, row_labels, col_labels, "vector activation map", p);
}

} // namespace residprobe
