#pragma once

#include <optional>
#include <string>
#include <vector>

#include "residprobe/common.hpp"

namespace residprobe {

struct DatasetRecord {
    std::string id;
    std::string dataset;
    std::string source_text;   // optional context
    std::string instructions;  // optional context
    std::string self_text;
    std::string other_text;
    std::string other_author;
};

// Line-delimited JSON, one record per line; unknown fields ignored.
std::vector<DatasetRecord> load_records(const std::string& path);
void save_records(const std::vector<DatasetRecord>& records, const std::string& path);
DatasetRecord record_from_json(const std::string& line);
std::string record_to_json(const DatasetRecord& r);

struct TrimOutcome {
    std::vector<DatasetRecord> kept;     // both texts cut to exactly `limit` chars
    std::vector<std::string> dropped_ids; // too short on either side
};

// Both texts are truncated to the same character count so neither side of a
// pair is a truncated-vs-whole giveaway. Records too short to trim are dropped.
TrimOutcome trim_texts(const std::vector<DatasetRecord>& records, int limit);

} // namespace residprobe
