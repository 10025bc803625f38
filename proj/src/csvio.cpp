#include "rotortrap/csvio.hpp"
#include "rotortrap/errors.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace rotortrap {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

CsvWriter::CsvWriter(std::vector<std::string> header) : n_cols_(header.size()) {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) text_ += ',';
        text_ += csv_escape(header[i]);
    }
    text_ += '\n';
}

void CsvWriter::add_row(const std::vector<std::string>& fields) {
    if (fields.size() != n_cols_)
        throw ConfigError("csv row has " + std::to_string(fields.size()) +
                          " fields, header has " + std::to_string(n_cols_));
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) text_ += ',';
        text_ += csv_escape(fields[i]);
    }
    text_ += '\n';
    ++n_rows_;
}

void CsvWriter::add_row(const std::vector<double>& values) {
    std::vector<std::string> fields;
    fields.reserve(values.size());
    for (double v : values) fields.push_back(format_double(v));
    add_row(fields);
}

void CsvWriter::write_file(const std::string& path) const {
    write_text_file(path, text_);
}

void write_text_file(const std::string& path, const std::string& text) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(target.parent_path(), ec);
        if (ec) throw ConfigError(path + ": cannot create parent directory: " + ec.message());
    }
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError(tmp.string() + ": cannot open for writing");
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        if (!out) throw ConfigError(tmp.string() + ": write failed");
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) throw ConfigError(path + ": rename failed: " + ec.message());
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line, const std::string& where) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') { cur += '"'; ++i; }
                else quoted = false;
            } else cur += c;
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c == '\r') {
            // tolerate CRLF input
        } else {
            cur += c;
        }
    }
    if (quoted) throw ConfigError(where + ": unterminated quoted field");
    fields.push_back(cur);
    return fields;
}

} // namespace

std::size_t CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    throw ConfigError("csv: no column named '" + name + "'");
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(path + ": cannot open");
    CsvTable table;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() && in.eof()) break;
        auto fields = split_csv_line(line, path + ":" + std::to_string(lineno));
        if (lineno == 1) table.header = std::move(fields);
        else {
            if (fields.size() != table.header.size())
                throw ConfigError(path + ":" + std::to_string(lineno) +
                                  ": expected " + std::to_string(table.header.size()) +
                                  " fields, got " + std::to_string(fields.size()));
            table.rows.push_back(std::move(fields));
        }
    }
    if (table.header.empty()) throw ConfigError(path + ": empty csv");
    return table;
}

} // namespace rotortrap
