#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include <json.hpp>

#include "tensorhar/classifier.hpp"
#include "tensorhar/dataset.hpp"
#include "tensorhar/error.hpp"
#include "tensorhar/text_io.hpp"

namespace tensorhar {

inline constexpr int kModelFormatVersion = 1;

// {format_version, family, params, classes, input_shape, standardizer, model}
inline json model_document(const Classifier& c, const LabelMap& labels) {
  json standardizer = nullptr;
  if (c.standardizer()) {
    standardizer = {{"mean", c.standardizer()->mean}, {"scale", c.standardizer()->scale}};
  }
  return {{"format_version", kModelFormatVersion},
          {"family", std::string(c.family())},
          {"params", c.params().is_null() ? json::object() : c.params()},
          {"classes", labels.names()},
          {"input_shape", c.input_shape()},
          {"standardizer", std::move(standardizer)},
          {"model", c.model_json()}};
}

struct LoadedModel {
  std::unique_ptr<Classifier> classifier;
  LabelMap labels;
};

inline LoadedModel model_from_document(const json& doc) {
  require(doc.is_object(), ErrorKind::format_error, "model document must be a JSON object");
  require(doc.contains("format_version") && doc.at("format_version").is_number_integer(),
          ErrorKind::format_error, "model document has no format_version");
  const int version = doc.at("format_version").get<int>();
  require(version == kModelFormatVersion, ErrorKind::format_error, "model format version ",
          version, " is not supported (supported: ", kModelFormatVersion, ")");
  require(doc.contains("family") && doc.at("family").is_string(), ErrorKind::format_error,
          "model document has no family tag");
  const auto family = doc.at("family").get<std::string>();
  bool known = false;
  for (const auto& f : model_families()) known = known || f == family;
  require(known, ErrorKind::format_error, "unknown model family '", family, "'");
  try {
    LoadedModel out;
    out.labels = LabelMap(doc.at("classes").get<std::vector<std::string>>());
    out.classifier = make_classifier(family, doc.value("params", json::object()));
    std::optional<StandardizerRecord> rec;
    if (doc.contains("standardizer") && !doc.at("standardizer").is_null()) {
      rec = StandardizerRecord{doc.at("standardizer").at("mean").get<std::vector<double>>(),
                               doc.at("standardizer").at("scale").get<std::vector<double>>()};
    }
    const auto shape = doc.at("input_shape").get<Shape>();
    if (rec) {
      require(rec->mean.size() == shape_size(shape) && rec->scale.size() == shape_size(shape),
              ErrorKind::format_error, "standardizer length does not match input shape ",
              shape_string(shape));
    }
    out.classifier->restore(out.labels.size(), shape, std::move(rec), doc.at("model"));
    return out;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::format_error, "malformed ", family, " model document: ", e.what());
  }
}

inline void save_model(const std::filesystem::path& path, const Classifier& c,
                       const LabelMap& labels) {
  write_text_file(path, model_document(c, labels).dump(1) + "\n");
}

inline LoadedModel load_model(const std::filesystem::path& path) {
  const auto text = read_text_file(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::format_error, path.string(), " is not a complete model document: ",
         e.what());
  }
  return model_from_document(doc);
}

}  // namespace tensorhar
