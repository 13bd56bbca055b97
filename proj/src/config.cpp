#include "mgcn/config.hpp"

#include <fstream>
#include <sstream>

namespace mgcn {

namespace {

std::string trim(std::string s) {
  s.erase(0, s.find_first_not_of(" \t"));
  s.erase(s.find_last_not_of(" \t") + 1);
  return s;
}

long to_long(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    const long x = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw Error("config key '" + key + "': expected an integer, got '" + v + "'");
  }
}

bool to_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw Error("config key '" + key + "': expected a boolean, got '" + v + "'");
}

Real to_real(const std::string& v, const std::string& key) {
  try {
    return text_to_real(v);
  } catch (const Error&) {
    throw Error("config key '" + key + "': expected a number, got '" + v + "'");
  }
}

}  // namespace

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw Error(origin + ":" + std::to_string(line_no) + ": empty key or value");

    if (key == "dataset.csv") {
      cfg.dataset_csv = value;
    } else if (key == "dataset.features") {
      cfg.features_path = value;
    } else if (key == "dataset.classes") {
      cfg.classes_path = value;
    } else if (key == "dataset.checkpoint") {
      cfg.checkpoint_path = value;
    } else if (key.rfind("schema.", 0) == 0) {
      const std::string column = key.substr(7);
      if (column.empty()) throw Error(origin + ": schema key names no column");
      cfg.schema[column] = column_kind_from_text(value);
    } else if (key == "split.train") {
      cfg.split.train = to_real(value, key);
    } else if (key == "split.val") {
      cfg.split.val = to_real(value, key);
    } else if (key == "split.test") {
      cfg.split.test = to_real(value, key);
    } else if (key == "preprocess.onehot_max_cardinality") {
      cfg.preprocess.onehot_max_cardinality = static_cast<int>(to_long(value, key));
    } else if (key == "subsample.max_records") {
      cfg.subsample_max_records = to_long(value, key);
    } else if (key == "graph.k_neighbors") {
      cfg.train.k_neighbors = static_cast<int>(to_long(value, key));
    } else if (key == "markov.inflation") {
      cfg.train.markov.inflation = to_real(value, key);
    } else if (key == "markov.epsilon") {
      cfg.train.markov.epsilon = to_real(value, key);
    } else if (key == "markov.nlayers") {
      cfg.train.markov.nlayers = static_cast<int>(to_long(value, key));
    } else if (key == "markov.expand") {
      cfg.train.markov.expand = to_bool(value, key);
    } else if (key == "model.hidden_dim") {
      cfg.train.hidden_dim = static_cast<int>(to_long(value, key));
    } else if (key == "model.propagation") {
      if (value == "markov") {
        cfg.train.propagation = TrainConfig::Propagation::markov;
      } else if (value == "symmetric") {
        cfg.train.propagation = TrainConfig::Propagation::symmetric;
      } else {
        throw Error("config key 'model.propagation': expected markov|symmetric, got '" +
                    value + "'");
      }
    } else if (key == "train.pretext_epochs") {
      cfg.train.pretext_epochs = static_cast<int>(to_long(value, key));
    } else if (key == "train.fine_tune_epochs") {
      cfg.train.fine_tune_epochs = static_cast<int>(to_long(value, key));
    } else if (key == "train.lr") {
      cfg.train.lr = to_real(value, key);
    } else if (key == "train.weight_decay") {
      cfg.train.weight_decay = to_real(value, key);
    } else if (key == "train.mode") {
      if (value == "ssl") {
        cfg.train.mode = TrainConfig::Mode::ssl;
      } else if (value == "scratch") {
        cfg.train.mode = TrainConfig::Mode::scratch;
      } else {
        throw Error("config key 'train.mode': expected ssl|scratch, got '" + value + "'");
      }
    } else if (key == "seed") {
      cfg.train.seed = static_cast<std::uint64_t>(to_long(value, key));
    } else if (key == "out") {
      cfg.out_dir = value;
    } else {
      throw Error(origin + ":" + std::to_string(line_no) + ": unknown config key '" + key + "'");
    }
  }
  return cfg;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("config file not found: " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config_text(text.str(), path);
}

std::map<std::string, std::string> config_echo(const RunConfig& cfg) {
  auto echo = train_config_echo(cfg.train);
  echo["split.train"] = real_to_text(cfg.split.train);
  echo["split.val"] = real_to_text(cfg.split.val);
  echo["split.test"] = real_to_text(cfg.split.test);
  echo["preprocess.onehot_max_cardinality"] =
      std::to_string(cfg.preprocess.onehot_max_cardinality);
  echo["subsample.max_records"] = std::to_string(cfg.subsample_max_records);
  if (!cfg.dataset_csv.empty()) echo["dataset.csv"] = cfg.dataset_csv;
  for (const auto& [column, kind] : cfg.schema)
    echo["schema." + column] = column_kind_to_text(kind);
  return echo;
}

}  // namespace mgcn
