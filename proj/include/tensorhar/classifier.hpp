#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tensorhar/dataset.hpp"
#include "tensorhar/error.hpp"
#include "tensorhar/forest.hpp"
#include "tensorhar/knn.hpp"
#include "tensorhar/logreg.hpp"
#include "tensorhar/signal_prep.hpp"
#include "tensorhar/stm.hpp"
#include "tensorhar/svm.hpp"

namespace tensorhar {

using json = nlohmann::json;

// Uniform fit / predict / scores contract over every model family. Inputs are
// standardized with training statistics when the `standardize` parameter is on.
class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual std::string_view family() const = 0;

  void fit(const Dataset& train) {
    validate(train);
    require(!train.empty(), ErrorKind::empty_input, "training set is empty");
    n_classes_ = train.n_classes();
    input_shape_ = train.sample_shape();
    if (standardize_) {
      standardizer_ = fit_standardizer(train);
      fit_impl(tensorhar::standardize(train, *standardizer_));
    } else {
      standardizer_.reset();
      fit_impl(train);
    }
  }

  int predict(const Tensor& x) const { return predict_impl(prepare(x)); }
  std::vector<double> scores(const Tensor& x) const { return scores_impl(prepare(x)); }

  std::vector<int> predict_all(const Dataset& d) const {
    std::vector<int> out;
    out.reserve(d.size());
    for (const auto& s : d.samples) out.push_back(predict(s));
    return out;
  }

  const json& params() const { return params_; }
  std::size_t n_classes() const { return n_classes_; }
  const Shape& input_shape() const { return input_shape_; }
  const std::optional<StandardizerRecord>& standardizer() const { return standardizer_; }

  virtual json model_json() const = 0;

  // Restores a fitted state written by model_json().
  void restore(std::size_t n_classes, Shape input_shape,
               std::optional<StandardizerRecord> standardizer, const json& model) {
    n_classes_ = n_classes;
    input_shape_ = std::move(input_shape);
    standardizer_ = std::move(standardizer);
    restore_impl(model);
  }

 protected:
  Classifier(json params, bool standardize)
      : params_(std::move(params)), standardize_(standardize) {}

  virtual void fit_impl(const Dataset& train) = 0;
  virtual int predict_impl(const Tensor& x) const = 0;
  virtual std::vector<double> scores_impl(const Tensor& x) const = 0;
  virtual void restore_impl(const json& model) = 0;

  Tensor prepare(const Tensor& x) const {
    require(x.shape() == input_shape_, ErrorKind::dimension_mismatch, "input shape ",
            shape_string(x.shape()), " does not match the training shape ",
            shape_string(input_shape_));
    return standardizer_ ? tensorhar::standardize(x, *standardizer_) : x;
  }

  json params_;
  bool standardize_ = true;
  std::size_t n_classes_ = 0;
  Shape input_shape_;
  std::optional<StandardizerRecord> standardizer_;
};

// ---------------------------------------------------------------------------
// Hyperparameter parsing

namespace detail {

class ParamReader {
 public:
  ParamReader(std::string_view family, const json& params,
              std::initializer_list<const char*> allowed)
      : family_(family), params_(params.is_null() ? json::object() : params) {
    require(params_.is_object(), ErrorKind::invalid_argument, "hyperparameters for '",
            std::string(family), "' must be a JSON object");
    std::set<std::string> names(allowed.begin(), allowed.end());
    for (const auto& [key, value] : params_.items()) {
      if (!names.contains(key)) {
        std::string list;
        for (const auto& n : names) list += (list.empty() ? "" : ", ") + n;
        fail(ErrorKind::invalid_argument, "unknown hyperparameter '", key, "' for model '",
             std::string(family), "' (allowed: ", list, ")");
      }
    }
  }

  double number(const char* key, double fallback) const {
    if (!params_.contains(key)) return fallback;
    const auto& v = params_.at(key);
    require(v.is_number(), ErrorKind::invalid_argument, "hyperparameter '", key, "' of '",
            family_, "' must be a number");
    return v.get<double>();
  }

  std::size_t count(const char* key, std::size_t fallback) const {
    if (!params_.contains(key)) return fallback;
    const auto& v = params_.at(key);
    require(v.is_number_integer() && v.get<long long>() >= 0, ErrorKind::invalid_argument,
            "hyperparameter '", key, "' of '", family_, "' must be a non-negative integer");
    return v.get<std::size_t>();
  }

  std::optional<std::size_t> optional_count(const char* key) const {
    if (!params_.contains(key) || params_.at(key).is_null()) return std::nullopt;
    return count(key, 0);
  }

  bool flag(const char* key, bool fallback) const {
    if (!params_.contains(key)) return fallback;
    const auto& v = params_.at(key);
    require(v.is_boolean(), ErrorKind::invalid_argument, "hyperparameter '", key, "' of '",
            family_, "' must be true or false");
    return v.get<bool>();
  }

  std::string text(const char* key, const char* fallback,
                   std::initializer_list<const char*> choices) const {
    std::string value = fallback;
    if (params_.contains(key)) {
      const auto& v = params_.at(key);
      require(v.is_string(), ErrorKind::invalid_argument, "hyperparameter '", key, "' of '",
              family_, "' must be a string");
      value = v.get<std::string>();
    }
    for (const char* c : choices) {
      if (value == c) return value;
    }
    fail(ErrorKind::invalid_argument, "hyperparameter '", key, "' of '", family_,
         "' has unsupported value '", value, "'");
  }

  const json& raw() const { return params_; }

 private:
  std::string family_;
  json params_;
};

inline json to_json(const std::vector<std::vector<double>>& rows) {
  json out = json::array();
  for (const auto& r : rows) out.push_back(r);
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Families

class SvmClassifier final : public Classifier {
 public:
  SvmClassifier(const json& params, int jobs) : Classifier(params, true), jobs_(jobs) {
    detail::ParamReader r("svm", params,
                          {"C", "kernel", "gamma", "tolerance", "max_passes", "standardize"});
    cfg_.C = r.number("C", 1.0);
    cfg_.kernel = r.text("kernel", "linear", {"linear", "rbf"}) == "rbf" ? KernelType::rbf
                                                                          : KernelType::linear;
    if (r.raw().contains("gamma")) {
      const auto& g = r.raw().at("gamma");
      if (g.is_string()) {
        require(g.get<std::string>() == "scale", ErrorKind::invalid_argument,
                "svm gamma must be a positive number or \"scale\"");
      } else {
        cfg_.gamma = r.number("gamma", 1.0);
      }
    }
    cfg_.tolerance = r.number("tolerance", cfg_.tolerance);
    cfg_.max_passes = r.count("max_passes", cfg_.max_passes);
    standardize_ = r.flag("standardize", true);
    validate(cfg_);
  }

  std::string_view family() const override { return "svm"; }
  const OvoEnsemble& ensemble() const { return model_; }

  json model_json() const override {
    json pairs = json::array();
    for (std::size_t p = 0; p < model_.models.size(); ++p) {
      const auto& m = model_.models[p];
      json entry{{"positive", model_.pairs[p].positive},
                 {"negative", model_.pairs[p].negative},
                 {"b", m.bias}};
      if (m.kernel.type == KernelType::linear) {
        entry["w"] = m.weights;
      } else {
        entry["gamma"] = m.kernel.gamma;
        entry["supports"] = detail::to_json(m.support_vectors);
        entry["alphas"] = m.alphas;
        entry["labels"] = m.support_labels;
      }
      pairs.push_back(std::move(entry));
    }
    return json{{"kernel", cfg_.kernel == KernelType::linear ? "linear" : "rbf"},
                {"C", cfg_.C},
                {"pairs", std::move(pairs)}};
  }

 protected:
  void fit_impl(const Dataset& train) override {
    model_ = train_ovo(train.flattened(), cfg_, jobs_);
  }
  int predict_impl(const Tensor& x) const override { return predict_ovo(model_, x.values()); }
  std::vector<double> scores_impl(const Tensor& x) const override {
    std::vector<double> votes;
    ovo_vote(model_.pairs, pairwise_decisions(model_, x.values()), model_.n_classes, &votes);
    for (auto& v : votes) v /= static_cast<double>(std::max<std::size_t>(model_.pairs.size(), 1));
    return votes;
  }
  void restore_impl(const json& doc) override {
    model_ = OvoEnsemble{};
    model_.n_classes = n_classes_;
    const std::size_t dim = shape_size(input_shape_);
    const auto kernel = doc.at("kernel").get<std::string>();
    require(kernel == "linear" || kernel == "rbf", ErrorKind::format_error,
            "unsupported svm kernel '", kernel, "'");
    for (const auto& entry : doc.at("pairs")) {
      model_.pairs.push_back({entry.at("positive").get<int>(), entry.at("negative").get<int>()});
      BinarySvmModel m;
      m.dim = dim;
      m.C = doc.value("C", 1.0);
      m.bias = entry.at("b").get<double>();
      if (kernel == "linear") {
        m.kernel = Kernel{KernelType::linear, 0.0};
        m.weights = entry.at("w").get<std::vector<double>>();
        require(m.weights.size() == dim, ErrorKind::format_error, "svm weight vector has ",
                m.weights.size(), " entries, input has ", dim);
      } else {
        m.kernel = Kernel{KernelType::rbf, entry.at("gamma").get<double>()};
        m.support_vectors = entry.at("supports").get<std::vector<std::vector<double>>>();
        m.alphas = entry.at("alphas").get<std::vector<double>>();
        m.support_labels = entry.at("labels").get<std::vector<int>>();
      }
      model_.models.push_back(std::move(m));
    }
  }

 private:
  SvmConfig cfg_;
  int jobs_ = 1;
  OvoEnsemble model_;
};

class StmClassifier final : public Classifier {
 public:
  StmClassifier(const json& params, int jobs) : Classifier(params, true), jobs_(jobs) {
    detail::ParamReader r("stm", params,
                          {"C", "max_outer_iters", "convergence_tol", "inner_tolerance",
                           "inner_max_passes", "weighting", "distance_sigma2", "standardize"});
    cfg_.C = r.number("C", cfg_.C);
    cfg_.max_outer_iters = r.count("max_outer_iters", cfg_.max_outer_iters);
    cfg_.convergence_tol = r.number("convergence_tol", cfg_.convergence_tol);
    cfg_.inner_tolerance = r.number("inner_tolerance", cfg_.inner_tolerance);
    cfg_.inner_max_passes = r.count("inner_max_passes", cfg_.inner_max_passes);
    cfg_.weighting = r.text("weighting", "none", {"none", "distance"}) == "distance"
                         ? StmWeighting::distance
                         : StmWeighting::none;
    cfg_.distance_sigma2 = r.number("distance_sigma2", cfg_.distance_sigma2);
    standardize_ = r.flag("standardize", true);
    validate(cfg_);
  }

  std::string_view family() const override { return "stm"; }
  const StmEnsemble& ensemble() const { return model_; }

  json model_json() const override {
    json pairs = json::array();
    for (std::size_t p = 0; p < model_.models.size(); ++p) {
      const auto& m = model_.models[p];
      pairs.push_back(json{{"positive", model_.pairs[p].positive},
                           {"negative", model_.pairs[p].negative},
                           {"modes", detail::to_json(m.modes)},
                           {"b", m.bias},
                           {"last_mode", m.last_mode},
                           {"outer_iterations", m.outer_iterations},
                           {"converged", m.converged}});
    }
    return json{{"C", cfg_.C}, {"shape", input_shape_}, {"pairs", std::move(pairs)}};
  }

 protected:
  void fit_impl(const Dataset& train) override { model_ = train_stm_ovo(train, cfg_, jobs_); }
  int predict_impl(const Tensor& x) const override { return predict_stm_ovo(model_, x); }
  std::vector<double> scores_impl(const Tensor& x) const override {
    std::vector<double> votes;
    ovo_vote(model_.pairs, pairwise_decisions(model_, x), model_.n_classes, &votes);
    for (auto& v : votes) v /= static_cast<double>(std::max<std::size_t>(model_.pairs.size(), 1));
    return votes;
  }
  void restore_impl(const json& doc) override {
    model_ = StmEnsemble{};
    model_.n_classes = n_classes_;
    const auto shape = doc.at("shape").get<Shape>();
    require(shape == input_shape_, ErrorKind::format_error, "stm shape ", shape_string(shape),
            " differs from the document input shape ", shape_string(input_shape_));
    for (const auto& entry : doc.at("pairs")) {
      model_.pairs.push_back({entry.at("positive").get<int>(), entry.at("negative").get<int>()});
      StmBinaryModel m;
      m.shape = shape;
      m.modes = entry.at("modes").get<std::vector<std::vector<double>>>();
      require(m.modes.size() == shape.size(), ErrorKind::format_error,
              "stm pair has ", m.modes.size(), " modes for an order-", shape.size(), " shape");
      for (std::size_t n = 0; n < shape.size(); ++n) {
        require(m.modes[n].size() == shape[n], ErrorKind::format_error, "stm mode ", n,
                " has length ", m.modes[n].size(), ", expected ", shape[n]);
      }
      m.bias = entry.at("b").get<double>();
      m.last_mode = entry.value("last_mode", shape.size() - 1);
      m.outer_iterations = entry.value("outer_iterations", std::size_t{0});
      m.converged = entry.value("converged", false);
      model_.models.push_back(std::move(m));
    }
  }

 private:
  StmConfig cfg_;
  int jobs_ = 1;
  StmEnsemble model_;
};

class LogRegClassifier final : public Classifier {
 public:
  explicit LogRegClassifier(const json& params) : Classifier(params, true) {
    detail::ParamReader r("logreg", params, {"C", "max_iters", "grad_tol", "standardize"});
    cfg_.C = r.number("C", cfg_.C);
    cfg_.max_iters = r.count("max_iters", cfg_.max_iters);
    cfg_.grad_tol = r.number("grad_tol", cfg_.grad_tol);
    standardize_ = r.flag("standardize", true);
    require(cfg_.C > 0.0, ErrorKind::invalid_argument, "logreg C must be positive");
  }

  std::string_view family() const override { return "logreg"; }
  const LogRegModel& model() const { return model_; }

  json model_json() const override {
    return json{{"C", model_.C},
                {"l2", model_.l2},
                {"n_classes", model_.params.n_classes},
                {"n_features", model_.params.n_features},
                {"weights", model_.params.weights},
                {"bias", model_.params.bias}};
  }

 protected:
  void fit_impl(const Dataset& train) override {
    model_ = train_logreg(train.flattened(), cfg_);
  }
  int predict_impl(const Tensor& x) const override {
    return predict_linear(model_.params, x.values());
  }
  std::vector<double> scores_impl(const Tensor& x) const override {
    return softmax_scores(model_.params, x.values());
  }
  void restore_impl(const json& doc) override {
    model_ = LogRegModel{};
    model_.C = doc.value("C", 1.0);
    model_.l2 = doc.value("l2", 0.0);
    model_.params.n_classes = doc.at("n_classes").get<std::size_t>();
    model_.params.n_features = doc.at("n_features").get<std::size_t>();
    model_.params.weights = doc.at("weights").get<std::vector<double>>();
    model_.params.bias = doc.at("bias").get<std::vector<double>>();
    require(model_.params.weights.size() ==
                    model_.params.n_classes * model_.params.n_features &&
                model_.params.bias.size() == model_.params.n_classes,
            ErrorKind::format_error, "logreg parameter arrays have inconsistent sizes");
  }

 private:
  LogRegConfig cfg_;
  LogRegModel model_;
};

class KnnClassifier final : public Classifier {
 public:
  explicit KnnClassifier(const json& params) : Classifier(params, true) {
    detail::ParamReader r("knn", params, {"k", "metric", "sigma2", "standardize"});
    cfg_.k = r.count("k", cfg_.k);
    cfg_.metric = r.text("metric", "euclidean", {"euclidean", "tensor"}) == "tensor"
                      ? KnnMetric::tensor
                      : KnnMetric::euclidean;
    cfg_.sigma2 = r.number("sigma2", cfg_.sigma2);
    standardize_ = r.flag("standardize", true);
    require(cfg_.k >= 1, ErrorKind::invalid_argument, "knn k must be at least 1");
  }

  std::string_view family() const override { return "knn"; }

  json model_json() const override {
    json samples = json::array();
    for (const auto& s : model_.samples) samples.push_back(s.data());
    return json{{"k", cfg_.k},
                {"metric", cfg_.metric == KnnMetric::tensor ? "tensor" : "euclidean"},
                {"sigma2", cfg_.sigma2},
                {"samples", std::move(samples)},
                {"labels", model_.labels}};
  }

 protected:
  void fit_impl(const Dataset& train) override {
    KnnConfig cfg = cfg_;
    cfg.k = std::min(cfg.k, train.size());
    model_ = train_knn(train, cfg);
  }
  int predict_impl(const Tensor& x) const override { return predict_knn(model_, x); }
  std::vector<double> scores_impl(const Tensor& x) const override {
    return knn_vote(model_, x).fractions;
  }
  void restore_impl(const json& doc) override {
    model_ = KnnModel{};
    model_.config = cfg_;
    model_.config.k = doc.at("k").get<std::size_t>();
    model_.n_classes = n_classes_;
    model_.labels = doc.at("labels").get<std::vector<int>>();
    for (const auto& s : doc.at("samples")) {
      model_.samples.emplace_back(input_shape_, s.get<std::vector<double>>());
    }
    require(model_.samples.size() == model_.labels.size(), ErrorKind::format_error,
            "knn document has ", model_.samples.size(), " samples and ",
            model_.labels.size(), " labels");
  }

 private:
  KnnConfig cfg_;
  KnnModel model_;
};

class ForestClassifier final : public Classifier {
 public:
  ForestClassifier(const json& params, std::uint64_t seed, int jobs)
      : Classifier(params, false), jobs_(jobs) {
    detail::ParamReader r("forest", params,
                          {"n_estimators", "max_depth", "min_samples_leaf", "min_samples_split",
                           "bootstrap", "max_features", "standardize"});
    cfg_.n_estimators = r.count("n_estimators", cfg_.n_estimators);
    cfg_.max_depth = r.optional_count("max_depth");
    cfg_.min_samples_leaf = r.count("min_samples_leaf", cfg_.min_samples_leaf);
    cfg_.min_samples_split = r.count("min_samples_split", cfg_.min_samples_split);
    cfg_.bootstrap = r.flag("bootstrap", cfg_.bootstrap);
    cfg_.max_features = r.optional_count("max_features");
    cfg_.seed = seed;
    standardize_ = r.flag("standardize", false);
    validate(cfg_);
  }

  std::string_view family() const override { return "forest"; }
  const ForestModel& model() const { return model_; }

  json model_json() const override {
    json trees = json::array();
    for (const auto& t : model_.trees) {
      json feature = json::array(), threshold = json::array(), left = json::array(),
           right = json::array(), label = json::array();
      for (const auto& n : t.nodes) {
        feature.push_back(n.feature);
        threshold.push_back(n.threshold);
        left.push_back(n.left);
        right.push_back(n.right);
        label.push_back(n.label);
      }
      trees.push_back(json{{"feature", feature},
                           {"threshold", threshold},
                           {"left", left},
                           {"right", right},
                           {"label", label}});
    }
    return json{{"seed", cfg_.seed}, {"n_features", model_.n_features}, {"trees", std::move(trees)}};
  }

 protected:
  void fit_impl(const Dataset& train) override {
    model_ = train_forest(train.flattened(), cfg_, jobs_);
  }
  int predict_impl(const Tensor& x) const override { return predict_forest(model_, x.values()); }
  std::vector<double> scores_impl(const Tensor& x) const override {
    return forest_vote_fractions(model_, x.values());
  }
  void restore_impl(const json& doc) override {
    model_ = ForestModel{};
    model_.config = cfg_;
    model_.n_classes = n_classes_;
    model_.n_features = doc.at("n_features").get<std::size_t>();
    for (const auto& t : doc.at("trees")) {
      DecisionTree tree;
      const auto feature = t.at("feature").get<std::vector<int>>();
      const auto threshold = t.at("threshold").get<std::vector<double>>();
      const auto left = t.at("left").get<std::vector<int>>();
      const auto right = t.at("right").get<std::vector<int>>();
      const auto label = t.at("label").get<std::vector<int>>();
      require(threshold.size() == feature.size() && left.size() == feature.size() &&
                  right.size() == feature.size() && label.size() == feature.size(),
              ErrorKind::format_error, "forest tree arrays differ in length");
      for (std::size_t i = 0; i < feature.size(); ++i) {
        tree.nodes.push_back(TreeNode{feature[i], threshold[i], left[i], right[i], label[i]});
      }
      model_.trees.push_back(std::move(tree));
    }
  }

 private:
  ForestConfig cfg_;
  int jobs_ = 1;
  ForestModel model_;
};

inline const std::vector<std::string>& model_families() {
  static const std::vector<std::string> families{"svm", "stm", "logreg", "knn", "forest"};
  return families;
}

inline std::unique_ptr<Classifier> make_classifier(std::string_view family, const json& params,
                                                   std::uint64_t seed = 0, int jobs = 1) {
  if (family == "svm") return std::make_unique<SvmClassifier>(params, jobs);
  if (family == "stm") return std::make_unique<StmClassifier>(params, jobs);
  if (family == "logreg") return std::make_unique<LogRegClassifier>(params);
  if (family == "knn") return std::make_unique<KnnClassifier>(params);
  if (family == "forest") return std::make_unique<ForestClassifier>(params, seed, jobs);
  fail(ErrorKind::invalid_argument, "unknown model family '", std::string(family),
       "' (expected svm, stm, logreg, knn or forest)");
}

}  // namespace tensorhar
