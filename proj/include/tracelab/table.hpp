#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tracelab/util.hpp"

namespace tracelab {

/// Column-named table of strings with TSV round-trip. Cells must not contain
/// tabs or newlines; numeric formatting is the writer's responsibility.
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    std::size_t column_index(std::string_view name) const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) return i;
        throw std::out_of_range("table has no column: " + std::string(name));
    }

    bool has_column(std::string_view name) const {
        for (const auto& c : columns)
            if (c == name) return true;
        return false;
    }

    const std::string& cell(std::size_t row, std::string_view name) const {
        return rows.at(row).at(column_index(name));
    }

    std::vector<double> numeric_column(std::string_view name) const {
        std::size_t idx = column_index(name);
        std::vector<double> out;
        out.reserve(rows.size());
        for (const auto& r : rows) {
            try {
                out.push_back(std::stod(r.at(idx)));
            } catch (const std::exception&) {
                throw std::runtime_error("column " + std::string(name) +
                                         " has non-numeric cell: " + r.at(idx));
            }
        }
        return out;
    }

    std::vector<std::string> string_column(std::string_view name) const {
        std::size_t idx = column_index(name);
        std::vector<std::string> out;
        out.reserve(rows.size());
        for (const auto& r : rows) out.push_back(r.at(idx));
        return out;
    }

    void add_row(std::vector<std::string> row) {
        if (row.size() != columns.size())
            throw std::invalid_argument("row arity does not match column count");
        rows.push_back(std::move(row));
    }

    std::string to_tsv() const {
        std::ostringstream out;
        for (std::size_t i = 0; i < columns.size(); ++i) {
            if (i) out << '\t';
            out << columns[i];
        }
        out << '\n';
        for (const auto& row : rows) {
            for (std::size_t i = 0; i < row.size(); ++i) {
                if (i) out << '\t';
                out << row[i];
            }
            out << '\n';
        }
        return out.str();
    }

    static Table from_tsv_text(const std::string& text) {
        Table t;
        std::istringstream in(text);
        std::string line;
        if (!std::getline(in, line)) throw std::runtime_error("empty table");
        t.columns = split(line, '\t');
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            auto cells = split(line, '\t');
            if (cells.size() != t.columns.size())
                throw std::runtime_error("table row arity mismatch: " + line);
            t.rows.push_back(std::move(cells));
        }
        return t;
    }

    static Table load_tsv(const std::filesystem::path& path) {
        return from_tsv_text(read_file(path));
    }

    void save_tsv(const std::filesystem::path& path) const { atomic_write_file(path, to_tsv()); }
};

/// Fixed-width numeric formatting so exported tables are byte-stable.
inline std::string format_number(double v, int precision = 10) {
    std::ostringstream out;
    out.precision(precision);
    out << v;
    return out.str();
}

}  // namespace tracelab
