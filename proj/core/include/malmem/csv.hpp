#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace malmem {

/// Raw CSV contents: a header row plus string cells, rectangularity unchecked.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

/// RFC-4180 reader: quoted fields, embedded commas/quotes/newlines, CRLF.
/// Throws DataError on a missing file or a quoting violation.
CsvTable read_csv_file(const std::filesystem::path& path);

/// Parse CSV from an in-memory buffer (same rules as read_csv_file).
CsvTable read_csv_string(const std::string& text);

/// Write rows with minimal quoting (quote only when a cell needs it).
void write_csv_file(const std::filesystem::path& path, const std::vector<std::string>& header,
                    const std::vector<std::vector<std::string>>& rows);

/// Shortest decimal string that round-trips the double exactly.
std::string format_double(double v);

}  // namespace malmem
