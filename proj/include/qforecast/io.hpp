#pragma once

#include <filesystem>
#include <initializer_list>
#include <ostream>
#include <set>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace qf::io {

// Shortest text that parses back to the same double ("%.17g"); non-finite
// values render as nan / inf / -inf.
std::string format_double(double value);

// Writes one CSV row from heterogeneous cells.
class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& os) : os_(os) {}

  void header(std::initializer_list<std::string_view> names);

  template <typename... Cells>
  void row(const Cells&... cells) {
    bool first = true;
    ((emit(cells, first)), ...);
    os_ << '\n';
  }

 private:
  void emit(double v, bool& first) { sep(first); os_ << format_double(v); }
  void emit(int v, bool& first) { sep(first); os_ << v; }
  void emit(long v, bool& first) { sep(first); os_ << v; }
  void emit(long long v, bool& first) { sep(first); os_ << v; }
  void emit(unsigned v, bool& first) { sep(first); os_ << v; }
  void emit(unsigned long v, bool& first) { sep(first); os_ << v; }
  void emit(std::string_view v, bool& first) { sep(first); os_ << v; }
  void sep(bool& first) {
    if (!first) os_ << ',';
    first = false;
  }

  std::ostream& os_;
};

// Writes through a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

nlohmann::json read_json_file(const std::filesystem::path& path);

// Throws ParameterError if `object` has keys outside `allowed`.
void reject_unknown_keys(const nlohmann::json& object, const std::set<std::string>& allowed,
                         std::string_view context);

}  // namespace qf::io
