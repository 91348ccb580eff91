#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace mcpscope {

using Json = nlohmann::json;
namespace fs = std::filesystem;

std::string read_file(const fs::path& path);
/// Writes via a temporary sibling and rename, creating parent directories.
void write_file(const fs::path& path, std::string_view contents);

std::vector<Json> read_jsonl(const fs::path& path);
/// One compact JSON document per line; object keys are emitted sorted.
std::string to_jsonl(const std::vector<Json>& rows);
void write_jsonl(const fs::path& path, const std::vector<Json>& rows);

Json read_json(const fs::path& path);
void write_json(const fs::path& path, const Json& doc);

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);
std::string sha256_file(const fs::path& path);

/// Minimal delimited-table support. Reading honours double-quoted fields; writing
/// quotes fields that contain the separator, quotes or newlines.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    [[nodiscard]] std::size_t column(std::string_view name) const;  // throws if absent
    [[nodiscard]] bool has_column(std::string_view name) const;
};

Table parse_delimited(std::string_view contents, char sep);
Table read_csv(const fs::path& path);
Table read_tsv(const fs::path& path);
std::string format_csv(const Table& table);
std::string csv_field(std::string_view field);

/// Fixed six-significant-decimal formatting used in every emitted CSV.
std::string fmt_num(double value);

}  // namespace mcpscope
