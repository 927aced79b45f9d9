#include "sispersist/csv.hpp"

#include <charconv>
#include <fstream>
#include <ostream>

#include "sispersist/error.hpp"

namespace sispersist {

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string fmt(long long v) { return std::to_string(v); }

void CsvTable::write(std::ostream& os) const {
  for (const auto& [k, v] : meta) os << "# " << k << ": " << v << "\n";
  for (std::size_t i = 0; i < columns.size(); ++i) os << (i ? "," : "") << columns[i];
  os << "\n";
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i];
    os << "\n";
  }
}

void CsvTable::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  write(out);
  if (!out) throw Error("failed while writing " + path);
}

}  // namespace sispersist
