#pragma once

// JSONL reading with file:line diagnostics, and all-or-nothing file writes.

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "shh/error.hpp"
#include "shh/types.hpp"

namespace shh {

/// Calls `row(json, line_number)` for each non-blank line. Parse errors and
/// shh::Error / json exceptions thrown by `row` are rethrown as SchemaError
/// prefixed with "path:line".
inline void for_each_jsonl(const std::string& path,
                           const std::function<void(const json&, std::size_t)>& row) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const std::string where = path + ":" + std::to_string(n);
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw Error(ErrorCode::SchemaError, where + ": not a JSON object");
    }
    try {
      row(j, n);
    } catch (const Error& e) {
      const auto code = e.code() == ErrorCode::ConfigError ? e.code() : ErrorCode::SchemaError;
      throw Error(code, where + ": " + e.message());
    } catch (const json::exception& e) {
      throw Error(ErrorCode::SchemaError, where + ": " + e.what());
    }
  }
}

template <typename T, typename Parse>
std::vector<T> read_jsonl(const std::string& path, Parse parse) {
  std::vector<T> out;
  for_each_jsonl(path, [&](const json& j, std::size_t) { out.push_back(parse(j)); });
  return out;
}

/// Samples with sample_id unique per dataset.
inline std::vector<Sample> read_samples(const std::string& path) {
  std::vector<Sample> out;
  std::map<std::pair<std::string, std::string>, std::size_t> seen;
  for_each_jsonl(path, [&](const json& j, std::size_t line) {
    Sample s = sample_from_json(j);
    auto [it, fresh] = seen.emplace(std::pair{s.dataset_id, s.sample_id}, line);
    if (!fresh) {
      throw Error(ErrorCode::SchemaError, "duplicate sample_id '" + s.sample_id +
                                              "' (first seen on line " +
                                              std::to_string(it->second) + ")");
    }
    out.push_back(std::move(s));
  });
  return out;
}

/// Writes to a sibling temp file, then renames over `path`.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw Error(ErrorCode::IoError, "write failed for " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorCode::IoError, "cannot rename onto " + path.string());
  }
}

inline std::string to_jsonl(const std::vector<json>& rows) {
  std::string out;
  for (const auto& r : rows) {
    out += r.dump();
    out += '\n';
  }
  return out;
}

template <typename Range>
std::string to_jsonl_of(const Range& items) {
  std::string out;
  for (const auto& item : items) {
    out += to_json(item).dump();
    out += '\n';
  }
  return out;
}

/// Pretty JSON with a trailing newline.
inline std::string pretty(const json& j) { return j.dump(2) + "\n"; }

}  // namespace shh
