#include "nodex/io/csv.hpp"

#include <fstream>
#include <sstream>

namespace nodex::io {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

int CsvTable::require_column(const std::string& name) const {
  int c = column(name);
  NODEX_REQUIRE(c >= 0, "csv: missing column '" + name + "'");
  return c;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream f(path);
  NODEX_REQUIRE(f.good(), "read_csv: cannot open " + path.string());
  CsvTable t;
  std::string line;
  bool first = true;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (first) {
      t.header = fields;
      first = false;
    } else {
      NODEX_REQUIRE(fields.size() == t.header.size(),
                    "read_csv: ragged row in " + path.string());
      t.rows.push_back(std::move(fields));
    }
  }
  return t;
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
  std::ofstream f(path);
  NODEX_REQUIRE(f.good(), "write_csv: cannot open " + path.string());
  auto write_row = [&f](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) f << ',';
      f << row[i];
    }
    f << '\n';
  };
  write_row(table.header);
  for (const auto& r : table.rows) write_row(r);
}

}  // namespace nodex::io
