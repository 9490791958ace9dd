#pragma once

#include <string>
#include <vector>

namespace emachine::trace {

/// In-memory CSV with a fixed header; every row must have one cell per column.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);

  void add_row(std::vector<std::string> cells);
  std::size_t rows() const noexcept { return rows_.size(); }
  const std::vector<std::string>& header() const noexcept { return header_; }
  std::string str() const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// Shortest text that reads back to the same double.
std::string num(double v);

}  // namespace emachine::trace
