// tensorhar command-line driver.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tensorhar/tensorhar.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tensorhar;

namespace {

json defaults_for(const std::string& command) {
  return {
      {"command", command},
      {"seed", 0},
      {"output_dir", "out"},
      {"data",
       {{"source", "uci_har"},
        {"root", nullptr},
        {"representation", "auto"},
        {"labels", nullptr},
        {"test_fraction", 0.2},
        {"window", {{"length", 128}, {"stride", 64}, {"labeling", "strict"}}},
        {"filters", {{"moving_average_width", nullptr}, {"kalman", nullptr}}}}},
      {"model", {{"family", "svm"}, {"params", json::object()}}},
      {"eval", {{"protocol", "holdout"}, {"folds", 5}}},
      {"search", {{"n_candidates", nullptr}, {"space", nullptr}}},
      {"fed",
       {{"clients", 10},
        {"rounds", 10},
        {"local_epochs", 5},
        {"learning_rate", 0.1},
        {"partition", "iid"},
        {"alpha", 0.5},
        {"client_fraction", 1.0},
        {"C", 1.0}}},
      {"model_file", nullptr},
      {"inputs", json::array()},
      {"synth", {{"kind", "custom_csv"}}},
  };
}

// Keys whose values are free-form objects checked elsewhere.
const std::set<std::string> kOpaqueKeys{"params", "space", "kalman", "labels"};

void merge_config(json& base, const json& overlay, const std::string& path) {
  require(overlay.is_object(), ErrorKind::invalid_argument, "config section '", path,
          "' must be a JSON object");
  for (const auto& [key, value] : overlay.items()) {
    const std::string where = path.empty() ? key : path + "." + key;
    require(base.contains(key), ErrorKind::invalid_argument, "unknown config key '", where, "'");
    auto& slot = base[key];
    if (slot.is_object() && !kOpaqueKeys.contains(key)) {
      merge_config(slot, value, where);
    } else {
      slot = value;
    }
  }
}

struct Flags {
  std::string config_file;
  std::map<std::string, std::string> text;
  std::map<std::string, double> number;
  std::map<std::string, long long> integer;
  std::vector<std::string> params;
  std::vector<std::string> inputs;
  int jobs = 1;
};

// Parses key=value where value is JSON if it parses, a string otherwise.
std::pair<std::string, json> parse_assignment(const std::string& s) {
  const auto eq = s.find('=');
  require(eq != std::string::npos && eq > 0, ErrorKind::invalid_argument,
          "--param expects key=value, got '", s, "'");
  const std::string key = s.substr(0, eq), raw = s.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  return {key, value};
}

json resolve(const std::string& command, const Flags& f) {
  json cfg = defaults_for(command);
  if (!f.config_file.empty()) {
    json file;
    try {
      file = json::parse(read_text_file(f.config_file));
    } catch (const json::parse_error& e) {
      fail(ErrorKind::parse_error, f.config_file, ": ", e.what());
    }
    if (file.contains("command")) {
      require(file.at("command") == command, ErrorKind::invalid_argument, "config file is for '",
              file.at("command").dump(), "', not '", command, "'");
    }
    merge_config(cfg, file, "");
  }
  auto set = [&](const std::string& pointer, const json& v) { cfg[json::json_pointer(pointer)] = v; };
  for (const auto& [ptr, v] : f.text) set(ptr, v);
  for (const auto& [ptr, v] : f.number) set(ptr, v);
  for (const auto& [ptr, v] : f.integer) set(ptr, v);
  for (const auto& p : f.params) {
    auto [key, value] = parse_assignment(p);
    cfg["model"]["params"][key] = value;
  }
  if (!f.inputs.empty()) cfg["inputs"] = f.inputs;
  if (cfg["data"]["root"].is_null()) {
    if (const char* env = std::getenv("TENSORHAR_DATA"); env && *env) cfg["data"]["root"] = env;
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Data

struct Splits {
  Dataset train;
  Dataset test;
  std::string protocol;
  json info;
};

Representation representation_for(const json& cfg) {
  const auto r = cfg["data"]["representation"].get<std::string>();
  if (r == "auto") {
    return cfg["model"]["family"] == "stm" ? Representation::raw_tensors
                                           : Representation::feature_vectors;
  }
  return parse_representation(r);
}

CustomCsvConfig csv_config(const json& data) {
  CustomCsvConfig c;
  c.window.length = data["window"].value("length", std::size_t{128});
  c.window.stride = data["window"].value("stride", std::size_t{64});
  const auto labeling = data["window"].value("labeling", std::string("strict"));
  require(labeling == "strict" || labeling == "majority", ErrorKind::invalid_argument,
          "window labeling must be strict or majority");
  c.window.labeling = labeling == "strict" ? WindowLabeling::strict : WindowLabeling::majority;
  if (!data["filters"]["moving_average_width"].is_null()) {
    c.filters.moving_average_width = data["filters"]["moving_average_width"].get<std::size_t>();
  }
  if (const auto& k = data["filters"]["kalman"]; !k.is_null()) {
    require(k.is_object(), ErrorKind::invalid_argument, "data.filters.kalman must be an object");
    KalmanConfig kc;
    for (const auto& [key, v] : k.items()) {
      if (key == "Q") kc.process_variance = v.get<double>();
      else if (key == "R") kc.measurement_variance = v.get<double>();
      else if (key == "initial_estimate") kc.initial_estimate = v.get<double>();
      else if (key == "initial_variance") kc.initial_variance = v.get<double>();
      else fail(ErrorKind::invalid_argument, "unknown config key 'data.filters.kalman.", key, "'");
    }
    c.filters.kalman = kc;
  }
  if (!data["labels"].is_null()) c.labels = LabelMap(data["labels"].get<std::vector<std::string>>());
  return c;
}

Splits load_splits(const json& cfg) {
  const auto& data = cfg["data"];
  require(!data["root"].is_null(), ErrorKind::invalid_argument,
          "no dataset root: pass --data or set TENSORHAR_DATA");
  const fs::path root = data["root"].get<std::string>();
  const auto source = data["source"].get<std::string>();
  Splits s;
  if (source == "uci_har") {
    const auto repr = representation_for(cfg);
    auto d = load_uci_har(root, repr);
    s.train = std::move(d.train);
    s.test = std::move(d.test);
    s.protocol = "uci_har standard train/test split (" + std::to_string(s.train.size()) + " / " +
                 std::to_string(s.test.size()) + ")";
    s.info = {{"source", source}, {"representation", to_string(repr)}};
  } else if (source == "custom_csv") {
    const auto csv = csv_config(data);
    Dataset all;
    std::size_t dropped = 0;
    if (fs::is_directory(root)) {
      auto r = load_custom_csv_dir(root, csv);
      all = std::move(r.data);
      dropped = r.dropped_windows;
    } else {
      auto r = load_custom_csv(root, csv, 1);
      all = std::move(r.data);
      dropped = r.dropped_windows;
    }
    require(!all.empty(), ErrorKind::empty_input, "no windows loaded from ", root.string());
    // Held-out subjects, drawn from the run seed.
    std::set<int> subject_set(all.subjects.begin(), all.subjects.end());
    std::vector<int> subjects(subject_set.begin(), subject_set.end());
    Rng rng = make_rng(cfg["seed"].get<std::uint64_t>(), "holdout-subjects");
    shuffle(subjects, rng);
    const double frac = data["test_fraction"].get<double>();
    require(frac > 0.0 && frac < 1.0, ErrorKind::invalid_argument,
            "test_fraction must lie in (0, 1)");
    std::size_t n_test = static_cast<std::size_t>(std::llround(frac * static_cast<double>(subjects.size())));
    n_test = std::clamp<std::size_t>(n_test, 1, subjects.size() > 1 ? subjects.size() - 1 : 1);
    const std::set<int> test_subjects(subjects.begin(), subjects.begin() + static_cast<std::ptrdiff_t>(n_test));
    std::vector<std::size_t> tr, te;
    for (std::size_t i = 0; i < all.size(); ++i) {
      (test_subjects.contains(all.subjects[i]) ? te : tr).push_back(i);
    }
    s.train = all.subset(tr);
    s.test = all.subset(te);
    s.protocol = "custom_csv subject holdout (" + std::to_string(n_test) + " of " +
                 std::to_string(subjects.size()) + " subjects held out)";
    s.info = {{"source", source},
              {"representation", "raw_tensors"},
              {"dropped_windows", dropped},
              {"test_subjects", std::vector<int>(test_subjects.begin(), test_subjects.end())}};
  } else {
    fail(ErrorKind::invalid_argument, "unknown data source '", source,
         "' (expected uci_har or custom_csv)");
  }
  return s;
}

// ---------------------------------------------------------------------------
// Outputs

fs::path out_dir(const json& cfg) { return cfg["output_dir"].get<std::string>(); }

void write_json(const fs::path& path, const json& j) { write_text_file(path, j.dump(2) + "\n"); }

void persist_config(const json& cfg) { write_json(out_dir(cfg) / "resolved_config.json", cfg); }

std::uint64_t seed_of(const json& cfg) { return cfg["seed"].get<std::uint64_t>(); }

void write_report(const fs::path& dir, const std::string& stem, EvalReport report,
                  const json& cfg, const Splits& s) {
  report.protocol = s.protocol;
  json doc = to_json(report);
  doc["seed"] = cfg["seed"];
  doc["model"] = cfg["model"];
  doc["data"] = s.info;
  write_json(dir / (stem + ".json"), doc);
  write_text_file(dir / (stem + ".txt"), report_text(report));
  write_text_file(dir / (stem + "_confusion.csv"), confusion_csv(report.confusion));
}

// ---------------------------------------------------------------------------
// Commands

int cmd_train(const json& cfg, int jobs) {
  const auto s = load_splits(cfg);
  const auto family = cfg["model"]["family"].get<std::string>();
  auto model = make_classifier(family, cfg["model"]["params"], seed_of(cfg), jobs);
  model->fit(s.train);
  save_model(out_dir(cfg) / "model.json", *model, s.train.label_map);
  const auto pred = model->predict_all(s.test);
  write_report(out_dir(cfg), "report", compute_report(s.test.labels, pred, s.test.label_map), cfg,
               s);
  return 0;
}

int cmd_evaluate(const json& cfg, int) {
  require(!cfg["model_file"].is_null(), ErrorKind::invalid_argument,
          "evaluate needs --model-file");
  const auto loaded = load_model(cfg["model_file"].get<std::string>());
  json adjusted = cfg;
  adjusted["model"]["family"] = std::string(loaded.classifier->family());
  const auto s = load_splits(adjusted);
  require(s.test.label_map == loaded.labels, ErrorKind::invalid_argument,
          "model classes differ from the dataset's label map");
  const auto pred = loaded.classifier->predict_all(s.test);
  write_report(out_dir(cfg), "report", compute_report(s.test.labels, pred, s.test.label_map),
               adjusted, s);
  return 0;
}

Grouping grouping_of(const json& cfg) {
  const auto p = cfg["eval"]["protocol"].get<std::string>();
  if (p == "cv" || p == "holdout") return Grouping::none;
  if (p == "grouped_cv") return Grouping::by_subject;
  fail(ErrorKind::invalid_argument, "unknown eval protocol '", p,
       "' (expected holdout, cv or grouped_cv)");
}

int cmd_cv(const json& cfg, int jobs) {
  const auto s = load_splits(cfg);
  const auto family = cfg["model"]["family"].get<std::string>();
  const auto k = cfg["eval"]["folds"].get<std::size_t>();
  const auto r = cross_validate(family, cfg["model"]["params"], s.train, k, seed_of(cfg),
                                grouping_of(cfg), jobs);
  json doc = to_json(r);
  doc["seed"] = cfg["seed"];
  doc["model"] = cfg["model"];
  doc["data"] = s.info;
  write_json(out_dir(cfg) / "cv.json", doc);
  std::ostringstream t;
  t << std::fixed << std::setprecision(2) << "model";
  for (std::size_t f = 0; f < r.fold_accuracies.size(); ++f) t << "\tfold " << f + 1;
  t << "\tmean\n" << family;
  for (const double a : r.fold_accuracies) t << '\t' << 100.0 * a;
  t << '\t' << 100.0 * r.mean << "\n" << r.protocol << " on the training split\n";
  write_text_file(out_dir(cfg) / "cv.txt", t.str());
  return 0;
}

int cmd_search(const json& cfg, int jobs) {
  const auto s = load_splits(cfg);
  const auto family = cfg["model"]["family"].get<std::string>();
  SearchSpace space = default_search_space(family);
  if (!cfg["search"]["space"].is_null()) {
    space.values.clear();
    for (const auto& [key, v] : cfg["search"]["space"].items()) {
      require(v.is_array(), ErrorKind::invalid_argument, "search space entry '", key,
              "' must be a list");
      space.values[key] = v.get<std::vector<json>>();
    }
    space.n_candidates = space.size();
  }
  if (!cfg["search"]["n_candidates"].is_null()) {
    space.n_candidates = cfg["search"]["n_candidates"].get<std::size_t>();
  }
  space.folds = cfg["eval"]["folds"].get<std::size_t>();
  space.seed = seed_of(cfg);
  space.grouping = grouping_of(cfg);
  const auto r = randomized_search(family, space, s.train, jobs, cfg["model"]["params"]);
  json doc = to_json(r);
  doc["seed"] = cfg["seed"];
  doc["family"] = family;
  doc["space_size"] = space.size();
  doc["protocol"] = protocol_name(space.folds, space.grouping) + " on the training split";
  write_json(out_dir(cfg) / "search.json", doc);
  std::ostringstream t;
  t << "model\tbest hyperparameters\tmean cv accuracy\tfits\n"
    << family << '\t' << r.best_candidate().params.dump() << '\t' << std::fixed
    << std::setprecision(4) << r.best_candidate().cv.mean << '\t' << r.total_fits << '\n';
  write_text_file(out_dir(cfg) / "search.txt", t.str());
  return 0;
}

int cmd_fed(const json& cfg, int jobs) {
  json adjusted = cfg;
  adjusted["model"] = {{"family", "logreg"}, {"params", {{"C", cfg["fed"]["C"]}, {"standardize", false}}}};
  const auto s = load_splits(adjusted);
  const auto& f = cfg["fed"];
  FedConfig fc;
  fc.n_clients = f["clients"].get<std::size_t>();
  fc.n_rounds = f["rounds"].get<std::size_t>();
  fc.local_epochs = f["local_epochs"].get<std::size_t>();
  fc.local_learning_rate = f["learning_rate"].get<double>();
  const auto partition = f["partition"].get<std::string>();
  if (partition == "iid") fc.partition = PartitionKind::iid;
  else if (partition == "by_subject") fc.partition = PartitionKind::by_subject;
  else if (partition == "dirichlet") fc.partition = PartitionKind::dirichlet;
  else fail(ErrorKind::invalid_argument, "unknown partition '", partition, "'");
  fc.dirichlet_alpha = f["alpha"].get<double>();
  fc.client_fraction = f["client_fraction"].get<double>();
  fc.C = f["C"].get<double>();
  fc.seed = seed_of(cfg);
  const Dataset train = s.train.flattened(), test = s.test.flattened();
  const auto log = run_federation(train, test, fc, jobs);
  std::string ndjson;
  for (const auto& r : log) {
    if (r.round == 0) continue;
    ndjson += to_json(r).dump() + "\n";
  }
  write_text_file(out_dir(cfg) / "rounds.ndjson", ndjson);

  LogRegClassifier model(adjusted["model"]["params"]);
  model.restore(train.n_classes(), train.sample_shape(), std::nullopt,
                json{{"C", fc.C},
                     {"l2", l2_strength(fc.C, train.size())},
                     {"n_classes", log.back().global.n_classes},
                     {"n_features", log.back().global.n_features},
                     {"weights", log.back().global.weights},
                     {"bias", log.back().global.bias}});
  save_model(out_dir(cfg) / "model.json", model, train.label_map);
  json summary{{"seed", cfg["seed"]},
               {"protocol", s.protocol},
               {"partition", to_string(fc.partition)},
               {"initial_accuracy", log.front().accuracy},
               {"final_accuracy", log.back().accuracy},
               {"rounds", log.size() - 1}};
  write_json(out_dir(cfg) / "fed.json", summary);
  return 0;
}

int cmd_report(const json& cfg, int) {
  const auto& inputs = cfg["inputs"];
  require(!inputs.empty(), ErrorKind::invalid_argument, "report needs --inputs");
  json rows = json::array();
  std::ostringstream t;
  t << std::fixed << std::setprecision(4)
    << "run\tmodel\taccuracy\tmacro_precision\tmacro_recall\tmacro_f1\tweighted_f1\tcv_mean\n";
  for (const auto& in : inputs) {
    const fs::path dir = in.get<std::string>();
    const auto name = dir.filename().string();
    const auto report = json::parse(read_text_file(dir / "report.json"));
    json row{{"run", name},
             {"model", report["model"]["family"]},
             {"accuracy", report["accuracy"]},
             {"macro_avg", report["macro_avg"]},
             {"weighted_avg", report["weighted_avg"]},
             {"protocol", report["protocol"]}};
    std::string cv_mean = "-";
    if (fs::exists(dir / "cv.json")) {
      const auto cv = json::parse(read_text_file(dir / "cv.json"));
      row["cv_mean_accuracy"] = cv["mean_accuracy"];
      std::ostringstream c;
      c << std::fixed << std::setprecision(4) << cv["mean_accuracy"].get<double>();
      cv_mean = c.str();
    }
    t << name << '\t' << report["model"]["family"].get<std::string>() << '\t'
      << report["accuracy"].get<double>() << '\t'
      << report["macro_avg"]["precision"].get<double>() << '\t'
      << report["macro_avg"]["recall"].get<double>() << '\t'
      << report["macro_avg"]["f1"].get<double>() << '\t'
      << report["weighted_avg"]["f1"].get<double>() << '\t' << cv_mean << '\n';
    write_text_file(out_dir(cfg) / (name + "_confusion.csv"),
                    read_text_file(dir / "report_confusion.csv"));
    rows.push_back(std::move(row));
  }
  write_json(out_dir(cfg) / "comparison.json", json{{"runs", rows}});
  write_text_file(out_dir(cfg) / "comparison.txt", t.str());
  return 0;
}

int cmd_synth(const json& cfg, int) {
  const auto kind = cfg["synth"]["kind"].get<std::string>();
  const fs::path dir = out_dir(cfg);
  if (kind == "custom_csv") {
    synth::write_custom_dataset(dir, seed_of(cfg));
  } else if (kind == "uci_har") {
    synth::write_uci_layout(dir, seed_of(cfg));
  } else {
    fail(ErrorKind::invalid_argument, "unknown synthetic kind '", kind,
         "' (expected custom_csv or uci_har)");
  }
  return 0;
}

void print_error(const std::string& kind, const std::string& message) {
  std::cerr << json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tensorhar: activity recognition with support tensor machines and baselines"};
  app.require_subcommand(1);
  Flags flags;

  struct Command {
    const char* name;
    const char* help;
    int (*run)(const json&, int);
  };
  const std::vector<Command> commands{
      {"train", "fit a model on the training split and evaluate on the test split", cmd_train},
      {"evaluate", "evaluate a saved model on the test split", cmd_evaluate},
      {"cv", "stratified k-fold cross-validation on the training split", cmd_cv},
      {"search", "randomized hyperparameter search with cross-validation", cmd_search},
      {"fed", "federated averaging simulation with logistic regression", cmd_fed},
      {"report", "combine finished runs into one comparison table", cmd_report},
      {"synth-data", "write a synthetic dataset", cmd_synth},
  };

  std::map<std::string, CLI::App*> subs;
  for (const auto& c : commands) {
    auto* sub = app.add_subcommand(c.name, c.help);
    subs[c.name] = sub;
    sub->add_option("--config", flags.config_file, "JSON run configuration");
    sub->add_option("--jobs", flags.jobs, "worker threads")->check(CLI::PositiveNumber);
    auto text = [&](const char* flag, const char* pointer, const char* help) {
      sub->add_option_function<std::string>(
          flag, [&flags, pointer](const std::string& v) { flags.text[pointer] = v; }, help);
    };
    auto number = [&](const char* flag, const char* pointer, const char* help) {
      sub->add_option_function<double>(
          flag, [&flags, pointer](const double& v) { flags.number[pointer] = v; }, help);
    };
    auto integer = [&](const char* flag, const char* pointer, const char* help) {
      sub->add_option_function<long long>(
          flag, [&flags, pointer](const long long& v) { flags.integer[pointer] = v; }, help);
    };
    integer("--seed", "/seed", "top-level random seed");
    text("--out", "/output_dir", "output directory");
    if (std::string(c.name) == "synth-data") {
      text("--kind", "/synth/kind", "custom_csv or uci_har");
      continue;
    }
    if (std::string(c.name) == "report") {
      sub->add_option("--inputs", flags.inputs, "run directories to combine");
      continue;
    }
    text("--data", "/data/root", "dataset root (default: $TENSORHAR_DATA)");
    text("--source", "/data/source", "uci_har or custom_csv");
    text("--representation", "/data/representation", "auto, feature_vectors or raw_tensors");
    if (std::string(c.name) == "evaluate") {
      text("--model-file", "/model_file", "model document to evaluate");
      continue;
    }
    if (std::string(c.name) == "fed") {
      integer("--clients", "/fed/clients", "number of clients");
      integer("--rounds", "/fed/rounds", "communication rounds");
      integer("--local-epochs", "/fed/local_epochs", "local gradient steps per round");
      number("--lr", "/fed/learning_rate", "local learning rate");
      text("--partition", "/fed/partition", "iid, by_subject or dirichlet");
      number("--alpha", "/fed/alpha", "dirichlet concentration");
      number("--client-fraction", "/fed/client_fraction", "share of clients per round");
      number("--C", "/fed/C", "inverse regularization strength");
      continue;
    }
    text("--model", "/model/family", "svm, stm, logreg, knn or forest");
    number("--C", "/model/params/C", "regularization parameter");
    text("--kernel", "/model/params/kernel", "svm kernel: linear or rbf");
    integer("--k", "/model/params/k", "k-NN neighbour count");
    sub->add_option("--param", flags.params, "extra hyperparameter key=value");
    text("--protocol", "/eval/protocol", "holdout, cv or grouped_cv");
    integer("--folds", "/eval/folds", "cross-validation folds");
    if (std::string(c.name) == "search") {
      integer("--n-candidates", "/search/n_candidates", "configurations to sample");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage_error", e.what());
    return 2;
  }

  for (const auto& c : commands) {
    if (!subs[c.name]->parsed()) continue;
    try {
      const json cfg = resolve(c.name, flags);
      fs::create_directories(out_dir(cfg));
      persist_config(cfg);
      return c.run(cfg, flags.jobs);
    } catch (const Error& e) {
      print_error(std::string(to_string(e.kind())), e.what());
    } catch (const json::exception& e) {
      print_error("config_error", e.what());
    } catch (const std::exception& e) {
      print_error("runtime_error", e.what());
    }
    return 1;
  }
  return 1;
}
