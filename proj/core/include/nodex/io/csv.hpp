#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "nodex/common.hpp"

namespace nodex::io {

/// Minimal CSV: comma-separated, no quoting (ids and numbers only).
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 when absent
  int require_column(const std::string& name) const;
};

CsvTable read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const CsvTable& table);

std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace nodex::io
