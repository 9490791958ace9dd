#include "emachine/trace.hpp"

#include <charconv>
#include <sstream>

#include "emachine/error.hpp"

namespace emachine::trace {

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {
  if (header_.empty()) fail(Errc::Config, "CSV needs at least one column");
}

void CsvTable::add_row(std::vector<std::string> cells) {
  if (cells.size() != header_.size()) {
    fail(Errc::Config, "CSV row has " + std::to_string(cells.size()) + " cells, header has " +
                           std::to_string(header_.size()));
  }
  rows_.push_back(std::move(cells));
}

namespace {

void put_line(std::ostringstream& os, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) os << ',';
    const auto& c = cells[i];
    if (c.find_first_of(",\"\n") == std::string::npos) {
      os << c;
      continue;
    }
    os << '"';
    for (char ch : c) {
      if (ch == '"') os << '"';
      os << ch;
    }
    os << '"';
  }
  os << '\n';
}

}  // namespace

std::string CsvTable::str() const {
  std::ostringstream os;
  put_line(os, header_);
  for (const auto& r : rows_) put_line(os, r);
  return os.str();
}

std::string num(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) fail(Errc::Config, "cannot format number");
  return std::string(buf, end);
}

}  // namespace emachine::trace
