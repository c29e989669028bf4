#pragma once

// The `ewellness` command line: simulate | serve | featurize | train |
// evaluate | report. run() is callable in-process so tests can drive it.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ewellness/dataset.hpp"
#include "ewellness/http.hpp"
#include "ewellness/manifest.hpp"
#include "ewellness/ml/evaluate.hpp"
#include "ewellness/raw_files.hpp"
#include "ewellness/service.hpp"
#include "ewellness/simulator.hpp"
#include "ewellness/store.hpp"

namespace ewellness::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

struct SimulateOptions {
  sim::SimConfig config;
  std::string start_day = "2024-01-01";
  std::string out_dir;
  std::string post_url;
  std::string manifest;
};

struct ServeOptions {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string data_dir = "ewellness-data";
  std::string admin_token;
  std::optional<std::uint64_t> id_seed;
};

struct FeaturizeOptions {
  std::string events_dir;
  std::string data_dir;
  std::string out;
  std::string csv;
  std::string manifest;
};

struct ModelOptions {
  std::string dataset;
  std::string family = "extra_trees";
  int folds = 5;
  std::uint64_t seed = 42;
  std::string scope = "per_participant";
  int top_k = 25;
  int classes = 4;
  bool paper_mode = false;
  ml::KnnConfig knn;
  ml::ExtraTreesConfig extra_trees;
  ml::SvmConfig svm;
  ml::MlpConfig mlp;
  std::string out;
  std::string table;
  std::string manifest;

  ml::EvaluationConfig resolve() const {
    ml::EvaluationConfig cfg;
    cfg.model.family = *ml::parse_model_family(family);
    cfg.model.seed = seed;
    cfg.model.knn = knn;
    cfg.model.extra_trees = extra_trees;
    cfg.model.svm = svm;
    cfg.model.mlp = mlp;
    cfg.folds = folds;
    cfg.scope = scope == "global" ? ml::NormScope::global : ml::NormScope::per_participant;
    cfg.top_k = top_k;
    cfg.mode = classes == 3 ? ml::ClassMode::three_class : ml::ClassMode::four_class;
    cfg.paper_mode = paper_mode;
    return cfg;
  }
};

struct ReportOptions {
  std::string report;
  std::string manifest;
};

namespace detail {

inline std::string manifest_path(const std::string& explicit_path, const std::string& output,
                                 const std::string& subcommand) {
  if (!explicit_path.empty()) return explicit_path;
  if (!output.empty()) return output + ".manifest.json";
  return "ewellness-" + subcommand + ".manifest.json";
}

inline void write_text(const std::string& path, std::string_view text) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error("cannot write " + path);
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string replace_extension(const std::string& path, const std::string& ext) {
  return fs::path(path).replace_extension(ext).string();
}

inline void print_error(std::ostream& err, const std::exception& e) {
  std::string kind = "runtime";
  nlohmann::json body{{"message", e.what()}};
  if (auto* v = dynamic_cast<const ValidationError*>(&e)) {
    kind = "validation";
    body["field"] = v->field();
  } else if (dynamic_cast<const NotFoundError*>(&e)) {
    kind = "not_found";
  } else if (dynamic_cast<const AuthError*>(&e)) {
    kind = "auth";
  } else if (dynamic_cast<const ForbiddenError*>(&e)) {
    kind = "forbidden";
  }
  body["kind"] = kind;
  err << nlohmann::json{{"error", body}}.dump() << '\n';
}

inline HttpServer* g_server = nullptr;

inline void stop_server(int) {
  if (g_server) g_server->stop();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Subcommands

inline int run_simulate(SimulateOptions o, std::ostream& out) {
  o.config.start_day = LocalDay::parse(o.start_day);
  o.config.validate();
  if (o.out_dir.empty() && o.post_url.empty()) throw ValidationError("--out", "need --out and/or --post");

  std::vector<ParticipantId> ids;
  std::vector<std::string> tokens;
  std::optional<IngestClient> client;
  if (!o.post_url.empty()) {
    client.emplace(o.post_url);
    for (const auto& profile : sim::make_profiles(o.config)) {
      auto reg = client->register_participant(profile.tz_offset_minutes);
      ids.push_back(reg.record.id);
      tokens.push_back(reg.token);
    }
  }
  const auto cohort = sim::generate_cohort(o.config, ids);

  std::size_t posted = 0;
  if (client) {
    // One batch per simulated day, followed by that day's EMA.
    for (std::size_t p = 0; p < cohort.size(); ++p) {
      for (const auto& day : cohort[p].days) {
        const auto r = client->post_events(tokens[p], day.events);
        if (!r.errors.empty()) throw Error("server rejected event " + std::to_string(r.errors[0].index) + ": " + r.errors[0].message);
        posted += r.accepted;
        client->post_ema(tokens[p], day.ema.at.epoch_ms, day.ema.items);
      }
    }
  }

  RunManifest m;
  m.subcommand = "simulate";
  m.config = o.config.to_json();
  m.config["post"] = !o.post_url.empty();
  m.seed = o.config.seed;
  if (!o.out_dir.empty()) {
    write_raw_cohort(o.out_dir, sim::to_histories(cohort));
    for (const auto& name : kRawFileNames) m.add_output((fs::path(o.out_dir) / name).string());
  }
  const std::string manifest = detail::manifest_path(
      o.manifest, o.out_dir.empty() ? std::string() : (fs::path(o.out_dir) / "simulate").string(), "simulate");
  m.write(manifest);

  nlohmann::json summary{{"participants", cohort.size()}, {"manifest", manifest}};
  if (client) summary["posted_events"] = posted;
  if (!o.out_dir.empty()) summary["out"] = o.out_dir;
  out << summary.dump() << '\n';
  return kExitOk;
}

inline int run_serve(const ServeOptions& o, std::ostream& out) {
  SegmentFileStore store(o.data_dir);
  IngestService service(store, o.admin_token);
  if (o.id_seed) service.set_id_seed(*o.id_seed);
  HttpServer server(service);
  const int port = server.bind(o.host, o.port);

  RunManifest m;
  m.subcommand = "serve";
  m.config = {{"host", o.host},
              {"port", port},
              {"data_dir", o.data_dir},
              {"admin_enabled", !o.admin_token.empty()},
              {"id_seed", o.id_seed ? nlohmann::json(*o.id_seed) : nlohmann::json()}};
  m.seed = o.id_seed.value_or(0);
  m.write(fs::path(o.data_dir) / "serve.manifest.json");

  out << nlohmann::json{{"listening", o.host + ":" + std::to_string(port)}, {"data_dir", o.data_dir}}.dump()
      << std::endl;
  detail::g_server = &server;
  std::signal(SIGINT, detail::stop_server);
  std::signal(SIGTERM, detail::stop_server);
  server.serve();
  detail::g_server = nullptr;
  return kExitOk;
}

inline int run_featurize(FeaturizeOptions o, std::ostream& out) {
  if (o.events_dir.empty() == o.data_dir.empty()) {
    throw ValidationError("--events", "give exactly one of --events DIR or --data-dir DIR");
  }
  if (o.csv.empty()) o.csv = detail::replace_extension(o.out, ".csv");

  RunManifest m;
  m.subcommand = "featurize";
  std::vector<ParticipantHistory> cohort;
  if (!o.events_dir.empty()) {
    cohort = read_raw_cohort(o.events_dir);
    for (const auto& name : kRawFileNames) m.add_input((fs::path(o.events_dir) / name).string());
    m.config = {{"source", "events"}, {"feature_dictionary_version", kFeatureDictionaryVersion}};
  } else {
    if (!fs::is_directory(o.data_dir)) throw NotFoundError("no data directory " + o.data_dir);
    SegmentFileStore store(o.data_dir);
    for (const auto& rec : store.participants()) cohort.push_back(store.history(rec.id));
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(o.data_dir)) {
      if (entry.path().extension() == ".ndjson") files.push_back(entry.path().string());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) m.add_input(f);
    m.config = {{"source", "store"}, {"feature_dictionary_version", kFeatureDictionaryVersion}};
  }
  const auto ds = build_dataset(cohort);
  detail::write_text(o.out, dataset_json_string(ds));
  detail::write_text(o.csv, dataset_csv_string(ds));
  m.add_output(o.out);
  m.add_output(o.csv);
  const auto manifest = detail::manifest_path(o.manifest, o.out, "featurize");
  m.write(manifest);
  out << nlohmann::json{{"rows", ds.size()}, {"out", o.out}, {"csv", o.csv}, {"manifest", manifest}}.dump() << '\n';
  return kExitOk;
}

// Fits preprocessing and the model on the whole dataset and reports the
// in-sample confusion matrix.
inline int run_train(ModelOptions o, std::ostream& out, std::ostream& err) {
  const auto cfg = o.resolve();
  cfg.model.validate();
  const auto input = load_dataset(o.dataset);
  if (input.empty()) throw ValidationError("dataset", "cannot train on an empty dataset");
  const int k = ml::class_count(cfg.mode);
  const auto ds = cfg.mode == ml::ClassMode::three_class
                      ? ml::undersample(input, {DistressLevel::Low, DistressLevel::Moderate, DistressLevel::High},
                                        derive_seed(cfg.model.seed, ml::kUndersampleStream))
                      : input;
  const auto fitted = ml::fit_pipeline(ds, cfg, k, derive_seed(cfg.model.seed, 1));
  const auto pred = ml::predict(fitted, ds);
  const auto cm = ml::confusion_matrix(ds.label_indices(), pred, k);

  nlohmann::json j;
  j["schema_version"] = ml::kReportSchemaVersion;
  j["kind"] = "train";
  j["config"] = cfg.to_json();
  j["seed"] = cfg.model.seed;
  j["family"] = std::string(ml::to_string(cfg.model.family));
  std::vector<std::string> labels;
  for (int c = 0; c < k; ++c) labels.emplace_back(to_string(static_cast<DistressLevel>(c)));
  j["class_labels"] = labels;
  j["n_samples"] = ds.size();
  j["selected_features"] = fitted.selected;
  j["class_weights"] = fitted.class_weights;
  j["accuracy"] = static_cast<double>(ml::cm_trace(cm)) / static_cast<double>(ml::cm_total(cm));
  j["confusion_matrix"] = cm;
  const std::string text = j.dump(2) + "\n";
  const std::string table = ml::confusion_table(j);

  RunManifest m;
  m.subcommand = "train";
  m.config = cfg.to_json();
  m.seed = cfg.model.seed;
  m.add_input(o.dataset);
  if (!o.out.empty()) {
    if (o.table.empty()) o.table = detail::replace_extension(o.out, ".txt");
    detail::write_text(o.out, text);
    detail::write_text(o.table, table);
    m.add_output(o.out);
    m.add_output(o.table);
  } else {
    out << text;
    err << table;
    m.add_output_bytes("-", text);
  }
  m.write(detail::manifest_path(o.manifest, o.out, "train"));
  return kExitOk;
}

inline int run_evaluate(ModelOptions o, std::ostream& out, std::ostream& err) {
  const auto cfg = o.resolve();
  const auto ds = load_dataset(o.dataset);
  const auto report = ml::evaluate(ds, cfg);
  const std::string text = ml::report_json_string(report);
  const std::string table = ml::confusion_table(ml::to_json(report));

  RunManifest m;
  m.subcommand = "evaluate";
  m.config = cfg.to_json();
  m.seed = cfg.model.seed;
  m.add_input(o.dataset);
  if (!o.out.empty()) {
    if (o.table.empty()) o.table = detail::replace_extension(o.out, ".txt");
    detail::write_text(o.out, text);
    detail::write_text(o.table, table);
    m.add_output(o.out);
    m.add_output(o.table);
  } else {
    out << text;
    err << table;
    m.add_output_bytes("-", text);
  }
  m.write(detail::manifest_path(o.manifest, o.out, "evaluate"));
  return kExitOk;
}

inline int run_report(const ReportOptions& o, std::ostream& out) {
  const auto j = nlohmann::json::parse(detail::read_text(o.report));
  const std::string table = ml::confusion_table(j);
  out << table;
  RunManifest m;
  m.subcommand = "report";
  m.seed = j.value("seed", std::uint64_t{0});
  m.add_input(o.report);
  m.add_output_bytes("-", table);
  m.write(detail::manifest_path(o.manifest, "", "report"));
  return kExitOk;
}

// ---------------------------------------------------------------------------
// Argument parsing

inline void add_model_flags(CLI::App& cmd, ModelOptions& o) {
  cmd.add_option("dataset", o.dataset, "Dataset file (.json or .csv) from featurize")->required();
  cmd.add_option("--family", o.family, "Model family")
      ->check(CLI::IsMember({"knn", "extra_trees", "svm", "mlp"}))
      ->capture_default_str();
  cmd.add_option("--folds", o.folds, "Cross-validation folds")->check(CLI::Range(2, 1000))->capture_default_str();
  cmd.add_option("--seed", o.seed, "Master seed")->capture_default_str();
  cmd.add_option("--scope", o.scope, "Z-score scope")
      ->check(CLI::IsMember({"per_participant", "global"}))
      ->capture_default_str();
  cmd.add_option("--top-k", o.top_k, "Number of features kept by correlation ranking")
      ->check(CLI::Range(1, 1000))
      ->capture_default_str();
  cmd.add_option("--classes", o.classes, "4 = all levels; 3 = under-sample Low/Moderate/High")
      ->check(CLI::IsMember({3, 4}))
      ->capture_default_str();
  cmd.add_flag("--paper-mode", o.paper_mode, "Fit preprocessing once on the full dataset (leaks test data)");
  cmd.add_option("--knn-k", o.knn.k, "KNN neighbours")->capture_default_str();
  cmd.add_option("--n-trees", o.extra_trees.n_trees, "Extra-trees ensemble size")->capture_default_str();
  cmd.add_option("--max-features", o.extra_trees.max_features, "Split candidates per node (0 = ceil sqrt)")
      ->capture_default_str();
  cmd.add_option("--svm-lambda", o.svm.lambda, "SVM L2 strength")->capture_default_str();
  cmd.add_option("--svm-epochs", o.svm.epochs, "SVM passes over the data")->capture_default_str();
  cmd.add_option("--mlp-hidden", o.mlp.hidden, "MLP hidden units")->capture_default_str();
  cmd.add_option("--mlp-lr", o.mlp.learning_rate, "MLP learning rate")->capture_default_str();
  cmd.add_option("--mlp-epochs", o.mlp.epochs, "MLP full-batch epochs")->capture_default_str();
  cmd.add_option("--out", o.out, "Write report JSON here (default: stdout)");
  cmd.add_option("--table", o.table, "Write the confusion table here (default: <out>.txt, or stderr)");
  cmd.add_option("--manifest", o.manifest, "Manifest path (default: <out>.manifest.json)");
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"eWellness passive-sensing pipeline", "ewellness"};
  app.require_subcommand(1);

  SimulateOptions sim_o;
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic cohort to files and/or a live service");
  simulate->add_option("--participants", sim_o.config.n_participants, "Cohort size")->capture_default_str();
  simulate->add_option("--days", sim_o.config.n_days, "Days per participant")->capture_default_str();
  simulate->add_option("--signal", sim_o.config.signal_strength, "Planted signal strength in [0, 1]")
      ->capture_default_str();
  simulate->add_option("--seed", sim_o.config.seed, "Master seed")->capture_default_str();
  simulate->add_option("--light-period-s", sim_o.config.light_period_s, "Light sampling period (6 = full cadence)")
      ->capture_default_str();
  simulate->add_option("--heterogeneity", sim_o.config.heterogeneity, "Between-participant habit spread in [0, 1]")
      ->capture_default_str();
  simulate->add_option("--start-day", sim_o.start_day, "First local day (YYYY-MM-DD)")->capture_default_str();
  simulate->add_option("--out", sim_o.out_dir, "Write participants.json, events.ndjson, ema.ndjson here");
  simulate->add_option("--post", sim_o.post_url, "Register and upload to a running service, e.g. http://127.0.0.1:8080");
  simulate->add_option("--manifest", sim_o.manifest, "Manifest path (default: <out>/simulate.manifest.json)");

  ServeOptions serve_o;
  std::uint64_t id_seed = 0;
  auto* serve = app.add_subcommand("serve", "Run the ingest service until interrupted");
  serve->add_option("--host", serve_o.host, "Bind address")->capture_default_str();
  serve->add_option("--port", serve_o.port, "Port (0 = any free port)")
      ->envname("EWELLNESS_PORT")
      ->check(CLI::Range(0, 65535))
      ->capture_default_str();
  serve->add_option("--data-dir", serve_o.data_dir, "Segment file directory")
      ->envname("EWELLNESS_DATA_DIR")
      ->capture_default_str();
  serve->add_option("--admin-token", serve_o.admin_token, "Token allowed to read any participant")
      ->envname("EWELLNESS_ADMIN_TOKEN");
  auto* id_seed_opt =
      serve->add_option("--id-seed", id_seed, "Derive participant ids from this seed and registration order");

  FeaturizeOptions feat_o;
  auto* featurize = app.add_subcommand("featurize", "Build the labeled daily dataset");
  auto* events_opt = featurize->add_option("--events", feat_o.events_dir, "Directory written by simulate --out");
  auto* store_opt = featurize->add_option("--data-dir", feat_o.data_dir, "Service data directory");
  events_opt->excludes(store_opt);
  featurize->add_option("--out", feat_o.out, "Dataset JSON path")->required();
  featurize->add_option("--csv", feat_o.csv, "Dataset CSV path (default: <out>.csv)");
  featurize->add_option("--manifest", feat_o.manifest, "Manifest path (default: <out>.manifest.json)");

  ModelOptions train_o, eval_o;
  auto* train = app.add_subcommand("train", "Fit on the whole dataset and report in-sample results");
  add_model_flags(*train, train_o);
  auto* evaluate = app.add_subcommand("evaluate", "Stratified k-fold cross-validation");
  add_model_flags(*evaluate, eval_o);

  ReportOptions report_o;
  auto* report = app.add_subcommand("report", "Render the confusion matrix of a report JSON");
  report->add_option("report", report_o.report, "Report JSON from train or evaluate")->required();
  report->add_option("--manifest", report_o.manifest, "Manifest path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    if (code == 0) return kExitOk;
    err << app.help();
    return kExitUsage;
  }

  try {
    if (simulate->parsed()) return run_simulate(sim_o, out);
    if (serve->parsed()) {
      if (id_seed_opt->count() > 0) serve_o.id_seed = id_seed;
      return run_serve(serve_o, out);
    }
    if (featurize->parsed()) return run_featurize(feat_o, out);
    if (train->parsed()) return run_train(train_o, out, err);
    if (evaluate->parsed()) return run_evaluate(eval_o, out, err);
    if (report->parsed()) return run_report(report_o, out);
  } catch (const std::exception& e) {
    detail::print_error(err, e);
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace ewellness::cli
