#include "sage/corpus/seeds.hpp"

#include <fstream>
#include <iterator>
#include <unordered_set>

#include "sage/common/text.hpp"

namespace sage::corpus {

std::vector<std::vector<std::string>> parse_csv(std::istream& in) {
  const std::string doc{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool row_has_content = false;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const char c = doc[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < doc.size() && doc[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        quoted = true;
        row_has_content = true;
        break;
      case ',':
        row.push_back(std::move(field));
        field.clear();
        row_has_content = true;
        break;
      case '\r':
        break;
      case '\n':
        if (row_has_content || !field.empty()) {
          row.push_back(std::move(field));
          rows.push_back(std::move(row));
        }
        field.clear();
        row.clear();
        row_has_content = false;
        break;
      default:
        field += c;
        row_has_content = true;
    }
  }
  if (row_has_content || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

std::string decode_comma(std::string s) {
  static const std::string token = "_comma_";
  for (auto pos = s.find(token); pos != std::string::npos; pos = s.find(token, pos + 1))
    s.replace(pos, token.size(), ",");
  return s;
}

std::size_t find_column(const std::vector<std::string>& header, std::string_view name,
                        std::string_view alias) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    auto h = text::to_lower_ascii(text::trim(header[i]));
    if (h == name) return i;
  }
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (text::to_lower_ascii(text::trim(header[i])) == alias) return i;
  }
  throw SchemaError(std::string(name), "seed file is missing required column '" + std::string(name) + "'");
}

}  // namespace

std::vector<SeedSituation> load_seed_situations(std::istream& in) {
  auto rows = parse_csv(in);
  if (rows.empty()) throw SchemaError("situation", "seed file is empty; expected header with 'situation'");
  auto& header = rows.front();
  // Strip a UTF-8 BOM on the first header cell.
  if (!header.empty() && header[0].rfind("\xEF\xBB\xBF", 0) == 0) header[0].erase(0, 3);
  const auto situation_col = find_column(header, "situation", "prompt");
  const auto sentiment_col = find_column(header, "sentiment", "context");

  std::vector<SeedSituation> out;
  std::unordered_set<std::string> seen;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() <= std::max(situation_col, sentiment_col)) continue;
    auto statement = std::string(text::trim(decode_comma(row[situation_col])));
    if (statement.empty() || !seen.insert(statement).second) continue;
    out.push_back({std::move(statement), std::string(text::trim(row[sentiment_col]))});
  }
  return out;
}

std::vector<SeedSituation> load_seed_situations(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open seed file " + path.string());
  return load_seed_situations(in);
}

}  // namespace sage::corpus
