#include "qsc/csv.hpp"

#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace qsc {

std::string format_double(double value) {
    char buffer[40];
    std::snprintf(buffer, sizeof(buffer), "%.12g", value);
    return buffer;
}

int CsvTable::column(const std::string& name) const {
    for (size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) {
            return static_cast<int>(i);
        }
    }
    return -1;
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("read_csv: cannot open " + path);
    }
    CsvTable table;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty() || line.front() == '#') {
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream stream(line);
        std::string cell;
        while (std::getline(stream, cell, ',')) {
            cells.push_back(cell);
        }
        if (!line.empty() && line.back() == ',') {
            cells.emplace_back();
        }
        if (first) {
            table.header = std::move(cells);
            first = false;
        } else {
            table.rows.push_back(std::move(cells));
        }
    }
    return table;
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& columns)
    : out_(path), path_(path), n_columns_(columns.size()) {
    if (!out_) {
        throw std::runtime_error("CsvWriter: cannot open " + path);
    }
    for (size_t i = 0; i < columns.size(); ++i) {
        out_ << columns[i] << (i + 1 < columns.size() ? "," : "");
    }
    out_ << '\n';
    out_.flush();
}

void CsvWriter::write_row(const std::vector<std::string>& cells) {
    if (cells.size() != n_columns_) {
        throw std::invalid_argument("CsvWriter: cell count does not match header of " + path_);
    }
    for (size_t i = 0; i < cells.size(); ++i) {
        out_ << cells[i] << (i + 1 < cells.size() ? "," : "");
    }
    out_ << '\n';
    out_.flush();
    if (!out_) {
        mark_incomplete();
        throw std::runtime_error("CsvWriter: write failed for " + path_);
    }
}

void CsvWriter::mark_incomplete() {
    out_.clear();
    out_ << "# incomplete\n";
    out_.flush();
}

}  // namespace qsc
