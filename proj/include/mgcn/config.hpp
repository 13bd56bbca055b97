#pragma once

#include <map>
#include <string>

#include "mgcn/ingest.hpp"
#include "mgcn/model.hpp"

namespace mgcn {

// Everything a run needs, parsed from a flat key = value file. Unknown keys
// are an error.
struct RunConfig {
  std::string dataset_csv;
  std::string features_path;   // defaults to <out>/features.txt
  std::string classes_path;    // defaults to <out>/classes.txt
  std::string graph_path;      // defaults to <out>/graph.txt
  std::string stack_path;      // defaults to <out>/markov_stack.txt
  std::string checkpoint_path; // defaults to <out>/checkpoint.txt
  SchemaMap schema;
  SplitRatios split;
  PreprocessOptions preprocess;
  long subsample_max_records = 0;  // 0 disables subsampling
  TrainConfig train;
  std::string out_dir;  // optional "out" key
};

RunConfig parse_config_file(const std::string& path);
RunConfig parse_config_text(const std::string& text, const std::string& origin);

// Flat map used for report/checkpoint echoes.
std::map<std::string, std::string> config_echo(const RunConfig& cfg);

int cli_main(int argc, char** argv);

}  // namespace mgcn
