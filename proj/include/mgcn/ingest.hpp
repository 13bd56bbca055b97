#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mgcn/common.hpp"
#include "mgcn/data_types.hpp"

namespace mgcn {

enum class ColumnKind { numeric, categorical, identifier, timestamp, label };

ColumnKind column_kind_from_text(const std::string& s);
std::string column_kind_to_text(ColumnKind k);

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::numeric;
};

// Raw tabular records. Cells are kept as text; numeric parsing happens per
// declared column kind. Exactly one column has kind=label.
struct RecordTable {
  std::vector<ColumnSpec> columns;
  std::vector<std::vector<std::string>> rows;
  long malformed_numeric_cells = 0;  // counted at load, substituted with 0

  int label_column() const;  // index of the label column, -1 if absent
};

// Column-name -> kind overrides; header columns not named here default to
// numeric.
using SchemaMap = std::map<std::string, ColumnKind>;

// Loads a comma-separated file with a header row. Quoted fields (RFC 4180
// style, "" escapes, embedded newlines) are supported. Malformed numeric
// cells are counted and read as 0; a row whose cell count differs from the
// header is a hard error naming the line.
RecordTable load_flow_csv(const std::string& path, const SchemaMap& schema);

struct PreprocessOptions {
  int onehot_max_cardinality = 16;  // above this, categoricals are frequency-encoded
};

struct Preprocessed {
  FeatureMatrix features;
  LabelVector labels;
  std::vector<std::string> dropped_columns;  // identifiers, timestamps, constants
};

// Drops identifier/timestamp columns, one-hot or frequency encodes
// categoricals, min-max scales everything to [0,1], drops constant columns,
// and maps labels to contiguous ids in lexicographic class-name order.
Preprocessed preprocess(const RecordTable& table, const PreprocessOptions& opts = {});

struct SplitRatios {
  Real train = 0.6;
  Real val = 0.2;
  Real test = 0.2;
};

// Per-class proportional split, deterministic per seed. Every class needs at
// least 3 samples so each split can hold one.
Masks stratified_split(const LabelVector& labels, const SplitRatios& ratios,
                       std::uint64_t seed);

// Gaussian blob per class, means separated by `separation`, unit-variance
// noise, rows in randomized order. Feature columns f0..f{F-1} plus a "label"
// column with zero-padded class names.
RecordTable synth_dataset(int n_per_class, int n_classes, int n_features,
                          Real separation, std::uint64_t seed);

// Indices (ascending) of a class-proportional subsample of at most
// max_records rows; every class keeps at least min(3, class size) rows.
std::vector<int> stratified_subsample(const LabelVector& labels, long max_records,
                                      std::uint64_t seed);

RecordTable take_rows(const RecordTable& table, const std::vector<int>& indices);

// Text persistence: header "N F C", then per node F feature values and the
// label id, space-separated at 17 significant digits.
void write_features(const std::string& path, const FeatureMatrix& x,
                    const LabelVector& y);
std::pair<FeatureMatrix, LabelVector> read_features(const std::string& path);

void write_class_names(const std::string& path, const std::vector<std::string>& names);
std::vector<std::string> read_class_names(const std::string& path);

}  // namespace mgcn
