#include "malmem/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "malmem/error.hpp"

namespace malmem {

namespace {

// State machine over the whole buffer; handles quoted fields with embedded
// delimiters, escaped quotes ("") and bare CR/LF/CRLF row ends.
CsvTable parse_csv(const std::string& text, const std::string& origin) {
    CsvTable table;
    std::vector<std::string> row;
    std::string cell;
    bool in_quotes = false;
    bool row_has_data = false;
    bool seen_header = false;

    auto end_cell = [&] {
        row.push_back(std::move(cell));
        cell.clear();
    };
    auto end_row = [&] {
        end_cell();
        if (!seen_header) {
            table.header = std::move(row);
            seen_header = true;
        } else {
            table.rows.push_back(std::move(row));
        }
        row.clear();
        row_has_data = false;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    cell.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                cell.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                if (!cell.empty())
                    throw DataError(origin + ": quote inside unquoted field near byte " +
                                    std::to_string(i));
                in_quotes = true;
                row_has_data = true;
                break;
            case ',':
                end_cell();
                row_has_data = true;
                break;
            case '\r':
                if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
                end_row();
                break;
            case '\n':
                end_row();
                break;
            default:
                cell.push_back(c);
                row_has_data = true;
        }
    }
    if (in_quotes) throw DataError(origin + ": unterminated quoted field");
    if (row_has_data || !row.empty()) end_row();
    return table;
}

bool needs_quoting(const std::string& cell) {
    for (char c : cell)
        if (c == ',' || c == '"' || c == '\n' || c == '\r') return true;
    return false;
}

void write_cell(std::ostream& os, const std::string& cell) {
    if (!needs_quoting(cell)) {
        os << cell;
        return;
    }
    os << '"';
    for (char c : cell) {
        if (c == '"') os << '"';
        os << c;
    }
    os << '"';
}

void write_row(std::ostream& os, const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) os << ',';
        write_cell(os, row[i]);
    }
    os << '\n';
}

}  // namespace

CsvTable read_csv_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_csv(buf.str(), path.string());
}

CsvTable read_csv_string(const std::string& text) { return parse_csv(text, "<string>"); }

void write_csv_file(const std::filesystem::path& path, const std::vector<std::string>& header,
                    const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write file: " + path.string());
    write_row(out, header);
    for (const auto& row : rows) write_row(out, row);
    if (!out) throw DataError("write failed: " + path.string());
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{}) throw Error("format_double failed");
    return std::string(buf, ptr);
}

}  // namespace malmem
