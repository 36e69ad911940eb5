#pragma once

#include <fstream>
#include <string>
#include <vector>

namespace qsc {

// Stable text form for CSV/SVG output; %.12g keeps summary recomputation
// within 1e-9 of the written values.
std::string format_double(double value);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const;  // -1 when absent
};

CsvTable read_csv(const std::string& path);

// Header written on open; rows flushed as they arrive so partial output
// survives an abort.
class CsvWriter {
  public:
    CsvWriter(const std::string& path, const std::vector<std::string>& columns);

    void write_row(const std::vector<std::string>& cells);
    void mark_incomplete();

  private:
    std::ofstream out_;
    std::string path_;
    size_t n_columns_;
};

}  // namespace qsc
