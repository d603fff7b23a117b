#pragma once

#include <string>
#include <vector>

namespace mtdml {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t n_rows() const { return rows.size(); }
  std::size_t n_cols() const { return header.size(); }
  // Index of a named column, or -1.
  int col(const std::string& name) const;
};

// Reads a UTF-8 CSV with a header row. Quoted fields may contain commas,
// doubled quotes and newlines.
CsvTable read_csv(const std::string& path);
CsvTable parse_csv(const std::string& content);

void write_csv(const std::string& path, const CsvTable& table);
std::string csv_quote(const std::string& field);

// Shortest decimal string that round-trips to the same double. Used for all
// persisted numbers so that write -> read -> write is byte-identical.
std::string format_double(double x);
double parse_double(const std::string& s, const std::string& context);
long parse_long(const std::string& s, const std::string& context);

}  // namespace mtdml
