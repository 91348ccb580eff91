#include "mcpscope/common/io.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>
#include <openssl/evp.h>

namespace mcpscope {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error(fmt::format("cannot open '{}'", path.string()));
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, std::string_view contents) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::runtime_error(fmt::format("cannot write '{}'", tmp.string()));
        }
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    }
    fs::rename(tmp, path);
}

std::vector<Json> read_jsonl(const fs::path& path) {
    std::vector<Json> rows;
    std::istringstream in(read_file(path));
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            rows.push_back(Json::parse(line));
        } catch (const Json::parse_error& e) {
            throw std::runtime_error(
                fmt::format("{}:{}: invalid JSON line: {}", path.string(), lineno, e.what()));
        }
    }
    return rows;
}

std::string to_jsonl(const std::vector<Json>& rows) {
    std::string out;
    for (const auto& row : rows) {
        out += row.dump(-1, ' ', false, Json::error_handler_t::replace);
        out += '\n';
    }
    return out;
}

void write_jsonl(const fs::path& path, const std::vector<Json>& rows) {
    write_file(path, to_jsonl(rows));
}

Json read_json(const fs::path& path) { return Json::parse(read_file(path)); }

void write_json(const fs::path& path, const Json& doc) { write_file(path, doc.dump(2, ' ', false, Json::error_handler_t::replace) + "\n"); }

std::string sha256_hex(std::string_view data) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("SHA-256 digest failed");
    }
    std::string hex;
    hex.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", md[i]);
    return hex;
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_file(path)); }

std::size_t Table::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    throw std::runtime_error(fmt::format("missing column '{}'", name));
}

bool Table::has_column(std::string_view name) const {
    for (const auto& h : header) {
        if (h == name) return true;
    }
    return false;
}

Table parse_delimited(std::string_view contents, char sep) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool quoted = false;
    bool field_started = false;
    for (std::size_t i = 0; i < contents.size(); ++i) {
        char c = contents[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < contents.size() && contents[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        if (c == '"' && !field_started) {
            quoted = true;
            field_started = true;
        } else if (c == sep) {
            record.push_back(std::move(field));
            field.clear();
            field_started = false;
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < contents.size() && contents[i + 1] == '\n') ++i;
            record.push_back(std::move(field));
            field.clear();
            field_started = false;
            if (!(record.size() == 1 && record[0].empty())) records.push_back(std::move(record));
            record.clear();
        } else {
            field += c;
            field_started = true;
        }
    }
    if (field_started || !record.empty()) {
        record.push_back(std::move(field));
        records.push_back(std::move(record));
    }
    Table table;
    if (records.empty()) return table;
    table.header = std::move(records.front());
    for (std::size_t r = 1; r < records.size(); ++r) {
        auto& row = records[r];
        row.resize(table.header.size());
        table.rows.push_back(std::move(row));
    }
    return table;
}

Table read_csv(const fs::path& path) { return parse_delimited(read_file(path), ','); }

Table read_tsv(const fs::path& path) { return parse_delimited(read_file(path), '\t'); }

std::string csv_field(std::string_view field) {
    if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::string format_csv(const Table& table) {
    std::string out;
    auto emit = [&](const std::vector<std::string>& row) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out += ',';
            out += csv_field(row[i]);
        }
        out += '\n';
    };
    emit(table.header);
    for (const auto& row : table.rows) emit(row);
    return out;
}

std::string fmt_num(double value) {
    if (std::isnan(value)) return "";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    std::string s = fmt::format("{:.6f}", value);
    if (s == "-0.000000") s = "0.000000";
    return s;
}

}  // namespace mcpscope
