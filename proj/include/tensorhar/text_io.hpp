#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "tensorhar/error.hpp"

namespace tensorhar {

inline std::string read_text_file(const std::filesystem::path& path) {
  require(std::filesystem::is_regular_file(path), ErrorKind::io_error, "missing file ",
          path.string());
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::io_error, "cannot open ", path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Writes via a temporary file and rename, so readers never see a partial file.
inline void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorKind::io_error, "cannot write ", path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.flush();
    require(static_cast<bool>(out), ErrorKind::io_error, "write failed for ", path.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    pos = end + 1;
  }
  return lines;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

inline double parse_double(std::string_view token, const std::string& where) {
  token = trim(token);
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  require(ec == std::errc() && ptr == token.data() + token.size() && !token.empty(),
          ErrorKind::parse_error, where, ": '", std::string(token), "' is not a number");
  return v;
}

inline int parse_int(std::string_view token, const std::string& where) {
  token = trim(token);
  int v = 0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  require(ec == std::errc() && ptr == token.data() + token.size() && !token.empty(),
          ErrorKind::parse_error, where, ": '", std::string(token), "' is not an integer");
  return v;
}

// Whitespace-separated reals; leading and repeated blanks are fine.
inline std::vector<double> parse_whitespace_row(std::string_view line, const std::string& where) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
    if (pos >= line.size()) break;
    std::size_t end = pos;
    while (end < line.size() && line[end] != ' ' && line[end] != '\t') ++end;
    out.push_back(parse_double(line.substr(pos, end - pos), where));
    pos = end;
  }
  return out;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto end = line.find(',', pos);
    out.push_back(trim(line.substr(pos, end == std::string_view::npos ? end : end - pos)));
    if (end == std::string_view::npos) break;
    pos = end + 1;
  }
  return out;
}

inline std::string location(const std::filesystem::path& file, std::size_t line) {
  return file.string() + ":" + std::to_string(line);
}

}  // namespace tensorhar
