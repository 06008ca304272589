#include "residprobe/dataset.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <set>

namespace residprobe {

DatasetRecord record_from_json(const std::string& line) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed dataset record: ") + e.what());
    }
    DatasetRecord r;
    r.id = j.at("id").get<std::string>();
    r.dataset = j.value("dataset", std::string{});
    r.source_text = j.value("source_text", std::string{});
    r.instructions = j.value("instructions", std::string{});
    r.self_text = j.at("self_text").get<std::string>();
    r.other_text = j.at("other_text").get<std::string>();
    r.other_author = j.value("other_author", std::string{});
    if (r.self_text.empty() || r.other_text.empty())
        throw DataError("dataset record '" + r.id + "': self_text and other_text must be non-empty");
    return r;
}

std::string record_to_json(const DatasetRecord& r) {
    nlohmann::json j;
    j["id"] = r.id;
    j["dataset"] = r.dataset;
    if (!r.source_text.empty()) j["source_text"] = r.source_text;
    if (!r.instructions.empty()) j["instructions"] = r.instructions;
    j["self_text"] = r.self_text;
    j["other_text"] = r.other_text;
    j["other_author"] = r.other_author;
    return j.dump();
}

std::vector<DatasetRecord> load_records(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open dataset: " + path);
    std::vector<DatasetRecord> out;
    std::set<std::string> seen;
    std::string line;
    size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        DatasetRecord r;
        try {
            r = record_from_json(line);
        } catch (const DataError& e) {
            throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        if (!seen.insert(r.id).second)
            throw DataError(path + ":" + std::to_string(lineno) + ": duplicate record id '" +
                            r.id + "'");
        out.push_back(std::move(r));
    }
    return out;
}

void save_records(const std::vector<DatasetRecord>& records, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw DataError("cannot open for writing: " + path);
    for (const auto& r : records) f << record_to_json(r) << "\n";
}

TrimOutcome trim_texts(const std::vector<DatasetRecord>& records, int limit) {
    if (limit < 1) throw UsageError("trim limit must be >= 1");
    TrimOutcome out;
    for (const auto& r : records) {
        if (static_cast<int>(r.self_text.size()) < limit ||
            static_cast<int>(r.other_text.size()) < limit) {
            out.dropped_ids.push_back(r.id);
            continue;
        }
        DatasetRecord t = r;
        t.self_text.resize(static_cast<size_t>(limit));
        t.other_text.resize(static_cast<size_t>(limit));
        out.kept.push_back(std::move(t));
    }
    return out;
}

} // namespace residprobe
