#include <gtest/gtest.h>

#include <fstream>
#include <functional>
#include <set>

#include "tensorhar/custom_csv.hpp"
#include "tensorhar/model_io.hpp"
#include "tensorhar/synth.hpp"
#include "tensorhar/uci_har.hpp"
#include "test_support.hpp"

using namespace tensorhar;
using th_test::Gen;
using th_test::TempDir;
namespace fs = std::filesystem;

namespace {

void write(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

std::string error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

std::string csv_rows(std::size_t n, const std::string& label, double t0 = 0.0) {
  std::string out;
  for (std::size_t t = 0; t < n; ++t) {
    out += std::to_string(t0 + 0.02 * static_cast<double>(t)) + ",0.1,0.2,9.8," + label + "\n";
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// UCI HAR layout

TEST(UciHar, SyntheticLayoutLoadsBothRepresentations) {
  TempDir dir("uci");
  synth::write_uci_layout(dir.path, 5);
  const auto feat = load_uci_har(dir.path, Representation::feature_vectors);
  EXPECT_EQ(feat.train.size(), 60u);
  EXPECT_EQ(feat.test.size(), 30u);
  EXPECT_EQ(feat.train.sample_shape(), Shape({561}));
  const auto raw = load_uci_har(dir.path, Representation::raw_tensors);
  EXPECT_EQ(raw.train.sample_shape(), Shape({128, 9}));
  EXPECT_EQ(raw.test.labels, feat.test.labels);
  EXPECT_EQ(raw.test.subjects, feat.test.subjects);
  // Labels 1..6 in the file map to 0..5, order preserved line by line.
  EXPECT_EQ(feat.train.labels[0], 0);
  EXPECT_EQ(feat.train.labels[5], 5);
  EXPECT_EQ(feat.train.label_map.name(0), "walking");
}

TEST(UciHar, ChannelOrderAndRowParsing) {
  TempDir dir("uci_order");
  const auto split = dir.path / "train";
  write(split / "y_train.txt", "2\n");
  write(split / "subject_train.txt", "7\n");
  std::string features;
  for (std::size_t j = 0; j < 561; ++j) features += "   " + std::to_string(j * 0.001);
  write(split / "X_train.txt", features + "\n");
  for (std::size_t c = 0; c < 9; ++c) {
    std::string row;
    for (std::size_t t = 0; t < 128; ++t) row += " " + std::to_string(c * 1000 + t);
    write(split / "Inertial Signals" / (std::string(uci_channels()[c]) + "_train.txt"), row + "\n");
  }
  const auto feat = load_uci_har_split(dir.path, "train", Representation::feature_vectors);
  ASSERT_EQ(feat.size(), 1u);
  EXPECT_EQ(feat.samples[0].size(), 561u);
  EXPECT_DOUBLE_EQ(feat.samples[0][560], 0.56);
  EXPECT_EQ(feat.labels[0], 1);
  EXPECT_EQ(feat.subjects[0], 7);
  const auto raw = load_uci_har_split(dir.path, "train", Representation::raw_tensors);
  const auto& x = raw.samples[0];
  for (std::size_t t = 0; t < 128; t += 17)
    for (std::size_t c = 0; c < 9; ++c) EXPECT_EQ(x[t * 9 + c], static_cast<double>(c * 1000 + t));
  EXPECT_STREQ(uci_channels()[0], "body_acc_x");
  EXPECT_STREQ(uci_channels()[3], "body_gyro_x");
  EXPECT_STREQ(uci_channels()[8], "total_acc_z");
}

TEST(UciHar, ErrorsCarryFileAndLine) {
  TempDir dir("uci_bad");
  synth::write_uci_layout(dir.path, 6, {2, 1, 2, 1, 0.5});
  const auto x_file = dir.path / "train" / "X_train.txt";
  const auto original = read_text_file(x_file);
  const auto lines = split_lines(original);
  std::string text;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    // Third row loses its last column.
    text += std::string(i == 2 ? lines[i].substr(0, lines[i].rfind(' ')) : lines[i]) + "\n";
  }
  write(x_file, text);
  auto msg = error_of([&] { load_uci_har(dir.path, Representation::feature_vectors); });
  EXPECT_NE(msg.find("X_train.txt:3"), std::string::npos) << msg;
  EXPECT_NE(msg.find("560"), std::string::npos) << msg;

  write(dir.path / "train" / "y_train.txt", "1\n2\nthree\n");
  msg = error_of([&] { load_uci_har(dir.path, Representation::feature_vectors); });
  EXPECT_NE(msg.find("y_train.txt:3"), std::string::npos) << msg;

  fs::remove(dir.path / "test" / "subject_test.txt");
  msg = error_of([&] { load_uci_har_split(dir.path, "test", Representation::raw_tensors); });
  EXPECT_NE(msg.find("subject_test.txt"), std::string::npos) << msg;
  EXPECT_FALSE(error_of([] { load_uci_har("/nonexistent/tensorhar", Representation::raw_tensors); }).empty());
}

TEST(UciHar, RepresentationNames) {
  EXPECT_EQ(parse_representation("raw"), Representation::raw_tensors);
  EXPECT_EQ(parse_representation("feature_vectors"), Representation::feature_vectors);
  EXPECT_THROW(parse_representation("pixels"), Error);
}

// ---------------------------------------------------------------------------
// Custom CSV

TEST(CustomCsv, SingleSegmentGivesOneWindow) {
  TempDir dir("csv1");
  write(dir.path / "s.csv", std::string(kCsvAccelHeader) + "\n" + csv_rows(128, "walking"));
  const auto r = load_custom_csv(dir.path / "s.csv", CustomCsvConfig{}, 4);
  ASSERT_EQ(r.data.size(), 1u);
  EXPECT_EQ(r.data.samples[0].shape(), Shape({128, 3}));
  EXPECT_EQ(r.data.subjects[0], 4);
  EXPECT_EQ(r.data.labels[0], 0);
  EXPECT_EQ(r.dropped_windows, 0u);
}

TEST(CustomCsv, EmptyDataSectionGivesEmptyDataset) {
  TempDir dir("csv2");
  write(dir.path / "s.csv", std::string(kCsvImuHeader) + "\n");
  const auto r = load_custom_csv(dir.path / "s.csv", CustomCsvConfig{});
  EXPECT_TRUE(r.data.empty());
}

TEST(CustomCsv, HeaderAndLabelErrors) {
  TempDir dir("csv3");
  write(dir.path / "h.csv", "time,ax,ay,az,label\n" + csv_rows(3, "walking"));
  auto msg = error_of([&] { load_custom_csv(dir.path / "h.csv", CustomCsvConfig{}); });
  EXPECT_NE(msg.find(kCsvAccelHeader), std::string::npos) << msg;
  EXPECT_NE(msg.find(kCsvImuHeader), std::string::npos) << msg;

  write(dir.path / "l.csv", std::string(kCsvAccelHeader) + "\n" + csv_rows(2, "walking") + "0.9,1,2,3,jogging\n");
  msg = error_of([&] { load_custom_csv(dir.path / "l.csv", CustomCsvConfig{}); });
  EXPECT_NE(msg.find("l.csv:4"), std::string::npos) << msg;
  EXPECT_NE(msg.find("jogging"), std::string::npos) << msg;

  write(dir.path / "n.csv", std::string(kCsvAccelHeader) + "\n0.0,1,abc,3,walking\n");
  msg = error_of([&] { load_custom_csv(dir.path / "n.csv", CustomCsvConfig{}); });
  EXPECT_NE(msg.find("n.csv:2"), std::string::npos) << msg;
}

TEST(CustomCsv, StrictWindowsAreCountedNotLost) {
  TempDir dir("csv4");
  write(dir.path / "s.csv", std::string(kCsvAccelHeader) + "\n" + csv_rows(128, "walking") +
                                csv_rows(128, "walking_upstairs", 10.0));
  const auto r = load_custom_csv(dir.path / "s.csv", CustomCsvConfig{});
  EXPECT_EQ(r.data.size() + r.dropped_windows, window_count(256, 128, 64));
  EXPECT_EQ(r.dropped_windows, 1u);
}

TEST(CustomCsv, FifteenParticipantAgeDistribution) {
  TempDir dir("csv5");
  synth::write_custom_dataset(dir.path, 3);
  const auto r = load_custom_csv_dir(dir.path, CustomCsvConfig{});
  EXPECT_EQ(r.subjects.size(), 15u);
  const auto counts = age_group_counts(r.subjects);
  EXPECT_EQ(counts.at("18-25"), 3u);
  EXPECT_EQ(counts.at("26-40"), 4u);
  EXPECT_EQ(counts.at("41-55"), 5u);
  EXPECT_EQ(counts.at("56-70"), 3u);
  EXPECT_FALSE(r.data.empty());
  std::set<int> subjects(r.data.subjects.begin(), r.data.subjects.end());
  EXPECT_EQ(subjects.size(), 15u);
  const auto again = load_custom_csv_dir(dir.path, CustomCsvConfig{});
  EXPECT_EQ(again.data.labels, r.data.labels);
}

TEST(LabelMaps, Bijection) {
  for (const auto& m : {LabelMap::six_class(), LabelMap::three_class()}) {
    for (std::size_t i = 0; i < m.size(); ++i) {
      EXPECT_EQ(m.id(m.name(static_cast<int>(i))), static_cast<int>(i));
    }
  }
  EXPECT_THROW(LabelMap({"a", "a"}), Error);
}

// ---------------------------------------------------------------------------
// Model documents

TEST(ModelIo, RoundTripIsBitIdenticalForEveryFamily) {
  TempDir dir("models");
  Gen g(7);
  auto d = synth::tensor_blobs(10, {6, 3}, 3, 1.0, 2);
  for (const auto& family : model_families()) {
    for (const char* kernel : {"linear", "rbf"}) {
      if (family != "svm" && std::string(kernel) == "rbf") continue;
      json params = json::object();
      if (family == "svm") params["kernel"] = kernel;
      if (family == "forest") params["n_estimators"] = 15;
      auto clf = make_classifier(family, params, 4);
      clf->fit(d);
      const auto path = dir.path / (family + "_" + kernel + ".json");
      save_model(path, *clf, d.label_map);
      const auto loaded = load_model(path);
      EXPECT_EQ(loaded.labels, d.label_map);
      for (int t = 0; t < 100; ++t) {
        const auto x = g.tensor({6, 3}, 3.0);
        EXPECT_EQ(loaded.classifier->predict(x), clf->predict(x)) << family;
        const auto a = loaded.classifier->scores(x), b = clf->scores(x);
        ASSERT_EQ(a.size(), b.size());
        for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(a[k], b[k]) << family << " " << kernel;
      }
    }
  }
}

TEST(ModelIo, StructuredErrors) {
  TempDir dir("model_err");
  auto d = synth::tensor_blobs(5, {4}, 2, 1.0, 3);
  auto clf = make_classifier("logreg", json::object());
  clf->fit(d);
  auto doc = model_document(*clf, d.label_map);

  auto unknown = doc;
  unknown["family"] = "boosting";
  auto msg = error_of([&] { model_from_document(unknown); });
  EXPECT_NE(msg.find("boosting"), std::string::npos) << msg;

  auto future = doc;
  future["format_version"] = 99;
  msg = error_of([&] { model_from_document(future); });
  EXPECT_NE(msg.find("supported: 1"), std::string::npos) << msg;

  const auto text = doc.dump();
  write(dir.path / "cut.json", text.substr(0, text.size() / 2));
  try {
    load_model(dir.path / "cut.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::format_error);
  }
  auto broken = doc;
  broken["model"].erase("weights");
  EXPECT_THROW(model_from_document(broken), Error);
}

TEST(ModelIo, HandBuiltLinearDocument) {
  // Two classes over 2 features: class 1 wins when 2·x0 − x1 + 0.5 > 0.
  const json doc = {{"format_version", 1},
                    {"family", "logreg"},
                    {"params", json::object()},
                    {"classes", {"neg", "pos"}},
                    {"input_shape", {2}},
                    {"standardizer", nullptr},
                    {"model",
                     {{"n_classes", 2},
                      {"n_features", 2},
                      {"weights", {0.0, 0.0, 2.0, -1.0}},  // row-major, one row per class
                      {"bias", {0.0, 0.5}}}}};
  const auto m = model_from_document(doc);
  Gen g(8);
  for (int t = 0; t < 200; ++t) {
    const double a = g.uniform(-3, 3), b = g.uniform(-3, 3);
    const double score = 2.0 * a - b + 0.5;
    if (std::abs(score) < 1e-9) continue;
    EXPECT_EQ(m.classifier->predict(Tensor::vector({a, b})), score > 0 ? 1 : 0);
    const auto p = m.classifier->scores(Tensor::vector({a, b}));
    EXPECT_NEAR(p[1], 1.0 / (1.0 + std::exp(-score)), 1e-12);
  }
}
