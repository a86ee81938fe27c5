#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace sage::corpus {

struct SeedSituation {
  std::string statement;
  std::string sentiment_label;

  friend bool operator==(const SeedSituation&, const SeedSituation&) = default;
};

class SchemaError : public std::runtime_error {
 public:
  SchemaError(std::string column, const std::string& what)
      : std::runtime_error(what), column_(std::move(column)) {}
  const std::string& column() const { return column_; }

 private:
  std::string column_;
};

/// Reads a CSV with a header containing `situation` and `sentiment` columns
/// (extra columns ignored; RFC 4180 quoting). The public dataset's column
/// names `prompt`/`context` are accepted as aliases and its `_comma_` escape
/// is decoded. Duplicate statements keep their first occurrence; blank
/// statements are skipped.
std::vector<SeedSituation> load_seed_situations(std::istream& in);
std::vector<SeedSituation> load_seed_situations(const std::filesystem::path& path);

/// Splits one CSV document into rows of fields.
std::vector<std::vector<std::string>> parse_csv(std::istream& in);

}  // namespace sage::corpus
