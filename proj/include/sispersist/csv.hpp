#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace sispersist {

/// One CSV artifact: "# key: value" comment lines, a header row, data rows.
struct CsvTable {
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void add_meta(std::string key, std::string value) { meta.emplace_back(std::move(key), std::move(value)); }
  void write(std::ostream& os) const;
  void save(const std::string& path) const;
};

/// Shortest round-trip representation of a double.
std::string fmt(double v);
std::string fmt(long long v);
inline std::string fmt(int v) { return fmt(static_cast<long long>(v)); }
inline std::string fmt(std::size_t v) { return fmt(static_cast<long long>(v)); }
inline std::string fmt(bool v) { return v ? "true" : "false"; }

}  // namespace sispersist
