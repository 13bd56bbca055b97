#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "mgcn/config.hpp"
#include "mgcn/graph.hpp"
#include "mgcn/ingest.hpp"
#include "mgcn/markov.hpp"
#include "mgcn/metrics.hpp"
#include "mgcn/model.hpp"

namespace mgcn {

namespace {

namespace fs = std::filesystem;

struct CliOptions {
  std::string config_path;
  std::string out_dir;
  std::string mode;
  long seed = -1;  // -1: keep the config value
  int synth_per_class = 100;
  int synth_classes = 3;
  int synth_features = 8;
  Real synth_separation = 6.0;
};

std::string resolve_out_dir(const CliOptions& opts, const RunConfig& cfg) {
  if (!opts.out_dir.empty()) return opts.out_dir;
  if (const char* env = std::getenv("MGCN_OUT"); env != nullptr && *env != '\0') return env;
  if (!cfg.out_dir.empty()) return cfg.out_dir;
  return "mgcn_out";
}

RunConfig load_config(const CliOptions& opts, bool required) {
  RunConfig cfg;
  if (!opts.config_path.empty()) {
    cfg = parse_config_file(opts.config_path);
  } else if (required) {
    throw Error("this subcommand needs --config <path>");
  }
  if (opts.seed >= 0) cfg.train.seed = static_cast<std::uint64_t>(opts.seed);
  if (opts.mode == "ssl") cfg.train.mode = TrainConfig::Mode::ssl;
  if (opts.mode == "scratch") cfg.train.mode = TrainConfig::Mode::scratch;
  return cfg;
}

void fill_default_paths(RunConfig& cfg, const std::string& out) {
  if (cfg.features_path.empty()) cfg.features_path = out + "/features.txt";
  if (cfg.classes_path.empty()) cfg.classes_path = out + "/classes.txt";
  if (cfg.graph_path.empty()) cfg.graph_path = out + "/graph.txt";
  if (cfg.stack_path.empty()) cfg.stack_path = out + "/markov_stack.txt";
  if (cfg.checkpoint_path.empty()) cfg.checkpoint_path = out + "/checkpoint.txt";
}

struct IngestArtifacts {
  FeatureMatrix features;
  LabelVector labels;
};

IngestArtifacts run_ingest(const RunConfig& cfg, const std::string& out, bool write_files) {
  if (cfg.dataset_csv.empty()) throw Error("config is missing dataset.csv");
  RecordTable table = load_flow_csv(cfg.dataset_csv, cfg.schema);
  std::cout << "loaded " << table.rows.size() << " records, " << table.columns.size()
            << " columns from " << cfg.dataset_csv << "\n";
  if (table.malformed_numeric_cells > 0)
    std::cout << "warning: " << table.malformed_numeric_cells
              << " malformed numeric cells read as 0\n";

  if (cfg.subsample_max_records > 0 &&
      static_cast<long>(table.rows.size()) > cfg.subsample_max_records) {
    // Subsample on raw labels so preprocessing sees only the kept rows.
    const int label_col = table.label_column();
    std::vector<std::string> raw(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) raw[r] = table.rows[r][label_col];
    std::vector<std::string> names = raw;
    std::sort(names.begin(), names.end());
    names.erase(std::unique(names.begin(), names.end()), names.end());
    LabelVector tmp;
    tmp.class_names = names;
    tmp.labels.resize(raw.size());
    for (std::size_t r = 0; r < raw.size(); ++r)
      tmp.labels[r] = static_cast<int>(
          std::lower_bound(names.begin(), names.end(), raw[r]) - names.begin());
    const auto keep = stratified_subsample(tmp, cfg.subsample_max_records, cfg.train.seed);
    table = take_rows(table, keep);
    std::cout << "stratified subsample kept " << table.rows.size() << " records\n";
  }

  Preprocessed pre = preprocess(table, cfg.preprocess);
  std::cout << "features: " << pre.features.data.rows() << " x " << pre.features.data.cols()
            << ", classes: " << pre.labels.n_classes() << "\n";
  if (!pre.dropped_columns.empty()) {
    std::cout << "dropped columns:";
    for (const auto& name : pre.dropped_columns) std::cout << ' ' << name;
    std::cout << "\n";
  }
  if (write_files) {
    write_features(out + "/features.txt", pre.features, pre.labels);
    write_class_names(out + "/classes.txt", pre.labels.class_names);
    std::cout << "wrote " << out << "/features.txt and classes.txt\n";
  }
  return {std::move(pre.features), std::move(pre.labels)};
}

IngestArtifacts read_ingested(const RunConfig& cfg) {
  auto [features, labels] = read_features(cfg.features_path);
  if (fs::exists(cfg.classes_path)) {
    const auto names = read_class_names(cfg.classes_path);
    if (static_cast<int>(names.size()) == labels.n_classes()) labels.class_names = names;
  }
  return {std::move(features), std::move(labels)};
}

SparseGraph run_build_graph(const RunConfig& cfg, const FeatureMatrix& features,
                            const std::string& out, bool write_files) {
  const SparseGraph g = knn_graph(features, cfg.train.k_neighbors, cfg.train.seed);
  std::cout << "graph: " << g.n_nodes << " nodes, " << g.edges.size()
            << " directed edges (k=" << cfg.train.k_neighbors << ")\n";
  if (write_files) {
    write_graph(out + "/graph.txt", g);
    std::cout << "wrote " << out << "/graph.txt\n";
  }
  return g;
}

MarkovLayerStack run_markov(const RunConfig& cfg, const SparseGraph& g, const std::string& out,
                            bool write_files) {
  const MarkovLayerStack stack = markov_process_agg(add_self_loops(g), cfg.train.markov);
  std::size_t nnz = 0;
  for (const auto& layer : stack.layers)
    for (const auto& row : layer.rows) nnz += row.size();
  std::cout << "markov stack: " << stack.layers.size() << " layers, " << nnz
            << " total entries\n";
  if (write_files) {
    write_stack(out + "/markov_stack.txt", stack);
    std::cout << "wrote " << out << "/markov_stack.txt\n";
  }
  return stack;
}

void write_history(const std::string& path, const std::vector<EpochRecord>& history) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << "phase,epoch,loss,val_accuracy\n";
  for (const auto& rec : history) {
    out << rec.phase << ',' << rec.epoch << ',' << real_to_text(rec.loss) << ',';
    if (rec.val_accuracy >= 0.0) out << real_to_text(rec.val_accuracy);
    out << '\n';
  }
}

void write_timing(const std::string& path, Real seconds) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << "wall_clock_seconds " << real_to_text(seconds) << '\n';
}

int run_train(const RunConfig& cfg, const IngestArtifacts& data, const std::string& out) {
  const Masks masks = stratified_split(data.labels, cfg.split, cfg.train.seed);
  DatasetBundle bundle{data.features, data.labels, masks};
  TrainResult result = train_pipeline(bundle, cfg.train);

  auto echo = config_echo(cfg);
  write_checkpoint(out + "/checkpoint.txt", result.params, echo);
  result.report.config_echo = echo;
  emit_report(result.report, out);
  write_history(out + "/history.csv", result.history);
  write_timing(out + "/timing.txt", result.elapsed_seconds);

  std::cout << "mode " << (cfg.train.mode == TrainConfig::Mode::ssl ? "ssl" : "scratch")
            << ", best validation accuracy " << result.best_val_accuracy << " at epoch "
            << result.best_epoch << "\n";
  std::cout << "test accuracy " << result.report.accuracy << ", weighted F1 "
            << result.report.weighted.f1 << ", micro-AUC " << result.report.auc_micro << "\n";
  std::cout << "elapsed " << result.elapsed_seconds << " s\n";
  std::cout << "wrote " << out << "/checkpoint.txt, report.json, report.txt, roc.csv\n";
  return 0;
}

int run_eval(const RunConfig& cfg, const std::string& out) {
  auto [params, echo] = read_checkpoint(cfg.checkpoint_path);
  const TrainConfig train_cfg = train_config_from_echo(echo);
  const auto data = read_ingested(cfg);
  // The checkpoint echo pins the split that training used.
  SplitRatios split = cfg.split;
  if (echo.count("split.train")) split.train = text_to_real(echo.at("split.train"));
  if (echo.count("split.val")) split.val = text_to_real(echo.at("split.val"));
  if (echo.count("split.test")) split.test = text_to_real(echo.at("split.test"));
  const Masks masks = stratified_split(data.labels, split, train_cfg.seed);

  const SparseGraph g = add_self_loops(knn_graph(data.features, train_cfg.k_neighbors,
                                                 train_cfg.seed));
  PropagationStack prop;
  if (train_cfg.propagation == TrainConfig::Propagation::markov) {
    prop = propagation_from_stack(markov_process_agg(g, train_cfg.markov));
  } else {
    prop = propagation_symmetric(symmetric_normalize(g), train_cfg.markov.nlayers);
  }
  const ForwardTrace trace = gcn_forward(prop, data.features, params);
  const LabelVector pred = predict(trace.logp, data.labels.class_names);

  std::vector<int> y_true, y_pred;
  Mat probs(mask_count(masks.test), data.labels.n_classes());
  Eigen::Index r = 0;
  for (std::size_t i = 0; i < data.labels.labels.size(); ++i) {
    if (!masks.test[i]) continue;
    y_true.push_back(data.labels.labels[i]);
    y_pred.push_back(pred.labels[i]);
    probs.row(r++) = trace.logp.row(static_cast<Eigen::Index>(i)).array().exp();
  }
  MetricsReport report = compute_metrics(y_true, y_pred, probs, data.labels.class_names);
  report.seed = train_cfg.seed;
  report.config_echo = echo;
  emit_report(report, out);
  std::cout << "test accuracy " << report.accuracy << ", weighted F1 " << report.weighted.f1
            << ", micro-AUC " << report.auc_micro << "\n";
  std::cout << "wrote " << out << "/report.json, report.txt, roc.csv\n";
  return 0;
}

int dispatch(const std::string& command, const CliOptions& opts) {
  RunConfig cfg = load_config(opts, command != "synth");
  const std::string out = resolve_out_dir(opts, cfg);
  fs::create_directories(out);
  fill_default_paths(cfg, out);

  if (command == "ingest") {
    run_ingest(cfg, out, true);
    return 0;
  }
  if (command == "build-graph") {
    const auto data = read_ingested(cfg);
    run_build_graph(cfg, data.features, out, true);
    return 0;
  }
  if (command == "markov") {
    const SparseGraph g = read_graph(cfg.graph_path);
    run_markov(cfg, g, out, true);
    return 0;
  }
  if (command == "train") {
    const auto data = read_ingested(cfg);
    return run_train(cfg, data, out);
  }
  if (command == "eval") {
    return run_eval(cfg, out);
  }
  if (command == "pipeline") {
    const auto data = run_ingest(cfg, out, true);
    const SparseGraph g = run_build_graph(cfg, data.features, out, true);
    run_markov(cfg, g, out, true);
    return run_train(cfg, data, out);
  }
  if (command == "synth") {
    const RecordTable table = synth_dataset(opts.synth_per_class, opts.synth_classes,
                                            opts.synth_features, opts.synth_separation,
                                            cfg.train.seed);
    const std::string path = out + "/synth.csv";
    std::ofstream csv(path);
    if (!csv) throw Error("cannot write " + path);
    for (std::size_t c = 0; c < table.columns.size(); ++c)
      csv << (c ? "," : "") << table.columns[c].name;
    csv << '\n';
    for (const auto& row : table.rows) {
      for (std::size_t c = 0; c < row.size(); ++c) csv << (c ? "," : "") << row[c];
      csv << '\n';
    }
    std::cout << "wrote " << path << " (" << table.rows.size() << " rows)\n";
    return 0;
  }
  throw Error("unknown subcommand '" + command + "'");
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"Self-supervised Markov-GCN pipeline for flow-level intrusion detection"};
  app.require_subcommand(1);
  app.fallthrough();

  CliOptions opts;
  app.add_option("--config", opts.config_path, "run configuration file (key = value lines)");
  app.add_option("--seed", opts.seed, "override the config seed");
  app.add_option("--out", opts.out_dir,
                 "output directory (default: $MGCN_OUT, then config 'out', then ./mgcn_out)");

  auto* ingest = app.add_subcommand("ingest", "CSV -> features.txt + classes.txt");
  auto* build_graph = app.add_subcommand("build-graph", "features.txt -> graph.txt");
  auto* markov = app.add_subcommand("markov", "graph.txt -> markov_stack.txt");
  auto* train = app.add_subcommand("train", "features.txt -> checkpoint + metrics report");
  auto* eval = app.add_subcommand("eval", "checkpoint -> metrics report");
  auto* pipeline = app.add_subcommand("pipeline", "ingest, graph, markov and train in one go");
  auto* synth = app.add_subcommand("synth", "generate a synthetic Gaussian-blob CSV");
  train->add_option("--mode", opts.mode, "ssl|scratch")
      ->check(CLI::IsMember({"ssl", "scratch"}));
  pipeline->add_option("--mode", opts.mode, "ssl|scratch")
      ->check(CLI::IsMember({"ssl", "scratch"}));
  synth->add_option("--per-class", opts.synth_per_class, "rows per class");
  synth->add_option("--classes", opts.synth_classes, "number of classes");
  synth->add_option("--features", opts.synth_features, "number of feature columns");
  synth->add_option("--separation", opts.synth_separation, "distance between class means");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  const CLI::App* sub = nullptr;
  for (const CLI::App* s : {ingest, build_graph, markov, train, eval, pipeline, synth})
    if (s->parsed()) sub = s;

  try {
    return dispatch(sub->get_name(), opts);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace mgcn
