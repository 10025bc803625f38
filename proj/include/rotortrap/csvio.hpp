#pragma once

// CSV output helpers.  All files are written with LF line endings and
// round-trip-exact numeric formatting so repeated runs with the same inputs
// produce byte-identical artifacts.

#include <cstdint>
#include <string>
#include <vector>

namespace rotortrap {

// Format a double with enough digits to round-trip exactly ("%.17g").
std::string format_double(double v);

// Quote a field per RFC 4180 if it contains a comma, quote, or newline.
std::string csv_escape(const std::string& field);

class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header);

    void add_row(const std::vector<std::string>& fields);
    void add_row(const std::vector<double>& values);

    std::size_t rows() const { return n_rows_; }
    const std::string& text() const { return text_; }

    // Writes atomically (temp file + rename) and creates parent directories.
    void write_file(const std::string& path) const;

private:
    std::size_t n_cols_ = 0;
    std::size_t n_rows_ = 0;
    std::string text_;
};

// Read back a CSV written by CsvWriter (header + numeric rows).
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const; // throws ConfigError if absent
};

CsvTable read_csv(const std::string& path);

void write_text_file(const std::string& path, const std::string& text);

} // namespace rotortrap
