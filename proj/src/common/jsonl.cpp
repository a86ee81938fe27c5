#include "sage/common/jsonl.hpp"

#include <fstream>
#include <stdexcept>

#include "sage/common/text.hpp"

namespace sage::jsonl {

ReadStats read(std::istream& in, const std::function<void(const json&)>& on_record) {
  ReadStats stats;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    ++stats.lines;
    try {
      on_record(json::parse(line));
    } catch (const std::exception&) {
      ++stats.corrupt;
      stats.corrupt_lines.push_back(lineno);
    }
  }
  return stats;
}

ReadStats read_file(const std::filesystem::path& path,
                    const std::function<void(const json&)>& on_record) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read(in, on_record);
}

std::string dump_line(const json& j) {
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

void write_file(const std::filesystem::path& path, const std::vector<json>& records) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& r : records) out << dump_line(r) << '\n';
  out.flush();
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace sage::jsonl
