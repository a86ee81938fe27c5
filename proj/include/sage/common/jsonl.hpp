#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

namespace sage::jsonl {

using nlohmann::json;

struct ReadStats {
  std::size_t lines = 0;
  std::size_t corrupt = 0;
  std::vector<std::size_t> corrupt_lines;  // 1-based
};

/// Calls `on_record` for each decodable line. Blank lines are skipped.
/// Lines that fail to decode, or for which `on_record` throws, are counted
/// as corrupt and skipped.
ReadStats read(std::istream& in, const std::function<void(const json&)>& on_record);
ReadStats read_file(const std::filesystem::path& path,
                    const std::function<void(const json&)>& on_record);

/// Writes one compact JSON object per line; throws std::runtime_error on I/O failure.
void write_file(const std::filesystem::path& path, const std::vector<json>& records);

std::string dump_line(const json& j);

}  // namespace sage::jsonl
