#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "tensorhar/dataset.hpp"
#include "tensorhar/error.hpp"
#include "tensorhar/signal_prep.hpp"
#include "tensorhar/text_io.hpp"

namespace tensorhar {

struct CustomCsvConfig {
  WindowConfig window;
  FilterConfig filters;
  LabelMap labels = LabelMap::three_class();
};

inline constexpr const char* kCsvAccelHeader = "timestamp,ax,ay,az,label";
inline constexpr const char* kCsvImuHeader = "timestamp,ax,ay,az,gx,gy,gz,label";

// Reads one stream; label tokens are names or ids of `labels`.
inline SampleStream read_stream_csv(const std::filesystem::path& path, const LabelMap& labels) {
  const auto text = read_text_file(path);
  const auto lines = split_lines(text);
  require(!lines.empty() && !trim(lines.front()).empty(), ErrorKind::parse_error, path.string(),
          ": missing header (expected ", kCsvAccelHeader, " or ", kCsvImuHeader, ")");
  std::vector<std::string> header;
  for (const auto col : split_csv(lines.front())) header.emplace_back(col);
  if (!header.empty() && header.front().rfind("\xEF\xBB\xBF", 0) == 0) {
    header.front().erase(0, 3);
  }
  const std::vector<std::string> accel{"timestamp", "ax", "ay", "az", "label"};
  const std::vector<std::string> imu{"timestamp", "ax", "ay", "az", "gx", "gy", "gz", "label"};
  require(header == accel || header == imu, ErrorKind::parse_error, path.string(),
          ": header must be '", kCsvAccelHeader, "' or '", kCsvImuHeader, "'");

  SampleStream s;
  s.channel_names.assign(header.begin() + 1, header.end() - 1);
  s.channels.resize(s.channel_names.size());
  s.labels.emplace();
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const auto where = location(path, i + 1);
    const auto cells = split_csv(lines[i]);
    require(cells.size() == header.size(), ErrorKind::parse_error, where, ": expected ",
            header.size(), " columns, found ", cells.size());
    s.timestamps.push_back(parse_double(cells.front(), where));
    for (std::size_t c = 0; c < s.channels.size(); ++c) {
      s.channels[c].push_back(parse_double(cells[c + 1], where));
    }
    try {
      s.labels->push_back(labels.id(cells.back()));
    } catch (const Error& e) {
      fail(ErrorKind::parse_error, where, ": ", e.what());
    }
  }
  validate(s);
  return s;
}

struct CsvLoadResult {
  Dataset data;
  std::size_t dropped_windows = 0;
};

inline CsvLoadResult load_custom_csv(const std::filesystem::path& path, const CustomCsvConfig& cfg,
                                     int subject = 0) {
  const auto stream = filter_stream(read_stream_csv(path, cfg.labels), cfg.filters);
  auto windows = window_stream(stream, cfg.window, subject);
  CsvLoadResult r;
  r.data.label_map = cfg.labels;
  r.data.description = "custom_csv " + path.filename().string();
  r.dropped_windows = windows.dropped;
  for (auto& w : windows.windows) r.data.add(std::move(w.values), w.label, w.subject);
  return r;
}

struct SubjectInfo {
  int subject = 0;
  std::string age_group;
  std::string file;
};

struct CsvDirectoryResult {
  Dataset data;
  std::vector<SubjectInfo> subjects;
  std::size_t dropped_windows = 0;
};

// Directory with subjects.csv (subject,age_group,file) and one stream per subject.
inline CsvDirectoryResult load_custom_csv_dir(const std::filesystem::path& dir,
                                              const CustomCsvConfig& cfg) {
  const auto index = dir / "subjects.csv";
  const auto text = read_text_file(index);
  const auto lines = split_lines(text);
  require(!lines.empty() && trim(lines.front()) == "subject,age_group,file",
          ErrorKind::parse_error, index.string(), ": header must be 'subject,age_group,file'");
  CsvDirectoryResult r;
  r.data.label_map = cfg.labels;
  r.data.description = "custom_csv " + dir.filename().string();
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const auto cells = split_csv(lines[i]);
    require(cells.size() == 3, ErrorKind::parse_error, location(index, i + 1),
            ": expected 3 columns");
    SubjectInfo info{parse_int(cells[0], location(index, i + 1)), std::string(cells[1]),
                     std::string(cells[2])};
    auto part = load_custom_csv(dir / info.file, cfg, info.subject);
    r.dropped_windows += part.dropped_windows;
    for (std::size_t w = 0; w < part.data.size(); ++w) {
      r.data.add(std::move(part.data.samples[w]), part.data.labels[w], info.subject);
    }
    r.subjects.push_back(std::move(info));
  }
  return r;
}

inline std::map<std::string, std::size_t> age_group_counts(const std::vector<SubjectInfo>& s) {
  std::map<std::string, std::size_t> out;
  for (const auto& info : s) ++out[info.age_group];
  return out;
}

}  // namespace tensorhar
