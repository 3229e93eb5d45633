#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "doremi/error.hpp"

namespace doremi::detail {

using json = nlohmann::json;

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw parse_error(path.string() + ": " + e.what());
  }
}

// Writes through a sibling temp file and renames, so readers never observe a
// half-written file.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw io_error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

// Calls fn(record, line_number) for every non-blank line. Line numbers are
// 1-based.
inline void for_each_jsonl(const std::filesystem::path& path,
                           const std::function<void(const json&, std::size_t)>& fn) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw parse_error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    fn(record, line_no);
  }
}

template <class T>
T field(const json& obj, std::string_view name, const std::string& context) {
  auto it = obj.find(name);
  if (it == obj.end()) throw parse_error(context + ": missing field '" + std::string(name) + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw parse_error(context + ": field '" + std::string(name) + "' has wrong type");
  }
}

}  // namespace doremi::detail
