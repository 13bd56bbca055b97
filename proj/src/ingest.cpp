#include "mgcn/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "mgcn/rng.hpp"

namespace mgcn {

ColumnKind column_kind_from_text(const std::string& s) {
  if (s == "numeric") return ColumnKind::numeric;
  if (s == "categorical") return ColumnKind::categorical;
  if (s == "identifier") return ColumnKind::identifier;
  if (s == "timestamp") return ColumnKind::timestamp;
  if (s == "label") return ColumnKind::label;
  throw Error("unknown column kind '" + s + "'");
}

std::string column_kind_to_text(ColumnKind k) {
  switch (k) {
    case ColumnKind::numeric: return "numeric";
    case ColumnKind::categorical: return "categorical";
    case ColumnKind::identifier: return "identifier";
    case ColumnKind::timestamp: return "timestamp";
    case ColumnKind::label: return "label";
  }
  throw Error("bad column kind");
}

int RecordTable::label_column() const {
  for (std::size_t c = 0; c < columns.size(); ++c)
    if (columns[c].kind == ColumnKind::label) return static_cast<int>(c);
  return -1;
}

namespace {

// One CSV record; quoted fields may contain commas, "" escapes and newlines.
// Returns false at end of input. line_no advances past consumed lines.
bool read_csv_record(std::istream& in, std::vector<std::string>& cells, long& line_no) {
  cells.clear();
  int ch = in.get();
  if (ch == EOF) return false;
  std::string cell;
  bool quoted = false;
  ++line_no;
  while (true) {
    if (ch == EOF) {
      cells.push_back(cell);
      return true;
    }
    if (quoted) {
      if (ch == '"') {
        const int peek = in.peek();
        if (peek == '"') {
          cell.push_back('"');
          in.get();
        } else {
          quoted = false;
        }
      } else {
        if (ch == '\n') ++line_no;
        cell.push_back(static_cast<char>(ch));
      }
    } else if (ch == '"' && cell.empty()) {
      quoted = true;
    } else if (ch == ',') {
      cells.push_back(cell);
      cell.clear();
    } else if (ch == '\n') {
      if (!cell.empty() && cell.back() == '\r') cell.pop_back();
      cells.push_back(cell);
      return true;
    } else {
      cell.push_back(static_cast<char>(ch));
    }
    ch = in.get();
  }
}

bool parse_numeric_cell(const std::string& cell, Real* out) {
  if (cell.empty()) return false;
  char* end = nullptr;
  const Real v = std::strtod(cell.c_str(), &end);
  if (end != cell.c_str() + cell.size()) return false;
  *out = v;
  return true;
}

std::vector<std::string> sorted_distinct(const std::vector<std::string>& values) {
  std::vector<std::string> distinct = values;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  return distinct;
}

std::string padded_class_name(int id, int n_classes) {
  int width = 1;
  for (int v = n_classes - 1; v >= 10; v /= 10) ++width;
  width = std::max(width, 2);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "class_%0*d", width, id);
  return buf;
}

}  // namespace

RecordTable load_flow_csv(const std::string& path, const SchemaMap& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);

  long line_no = 0;
  std::vector<std::string> cells;
  if (!read_csv_record(in, cells, line_no) || cells.empty())
    throw Error(path + ": missing header row");

  RecordTable table;
  table.columns.reserve(cells.size());
  std::set<std::string> header_names;
  for (const auto& name : cells) {
    header_names.insert(name);
    ColumnKind kind = ColumnKind::numeric;
    if (auto it = schema.find(name); it != schema.end()) kind = it->second;
    table.columns.push_back({name, kind});
  }
  for (const auto& [name, kind] : schema) {
    (void)kind;
    if (!header_names.count(name))
      throw Error(path + ": schema names column '" + name + "' absent from header");
  }
  int label_count = 0;
  for (const auto& col : table.columns)
    if (col.kind == ColumnKind::label) ++label_count;
  if (label_count == 0) throw Error(path + ": no column has kind=label");
  if (label_count > 1) throw Error(path + ": more than one label column");

  const std::size_t arity = table.columns.size();
  while (read_csv_record(in, cells, line_no)) {
    if (cells.size() == 1 && cells[0].empty()) continue;  // trailing blank line
    if (cells.size() != arity)
      throw Error(path + ": line " + std::to_string(line_no) + " has " +
                  std::to_string(cells.size()) + " cells, expected " + std::to_string(arity));
    for (std::size_t c = 0; c < arity; ++c) {
      if (table.columns[c].kind != ColumnKind::numeric) continue;
      Real v = 0.0;
      if (!parse_numeric_cell(cells[c], &v)) ++table.malformed_numeric_cells;
    }
    table.rows.push_back(cells);
  }
  return table;
}

Preprocessed preprocess(const RecordTable& table, const PreprocessOptions& opts) {
  const int label_col = table.label_column();
  if (label_col < 0) throw Error("preprocess: table has no label column");
  const std::size_t n = table.rows.size();
  if (n == 0) throw Error("preprocess: empty table");

  Preprocessed out;

  // Labels: lexicographic class order gives stable ids across runs.
  std::vector<std::string> raw_labels(n);
  for (std::size_t r = 0; r < n; ++r) raw_labels[r] = table.rows[r][label_col];
  out.labels.class_names = sorted_distinct(raw_labels);
  if (out.labels.class_names.size() < 2)
    throw Error("preprocess: need at least 2 classes, found " +
                std::to_string(out.labels.class_names.size()));
  std::map<std::string, int> class_id;
  for (std::size_t c = 0; c < out.labels.class_names.size(); ++c)
    class_id[out.labels.class_names[c]] = static_cast<int>(c);
  out.labels.labels.resize(n);
  for (std::size_t r = 0; r < n; ++r) out.labels.labels[r] = class_id[raw_labels[r]];

  // Candidate columns before the constant-drop / scaling pass.
  std::vector<std::string> names;
  std::vector<std::vector<Real>> columns;

  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    const ColumnSpec& spec = table.columns[c];
    switch (spec.kind) {
      case ColumnKind::label:
        break;
      case ColumnKind::identifier:
      case ColumnKind::timestamp:
        out.dropped_columns.push_back(spec.name);
        break;
      case ColumnKind::numeric: {
        std::vector<Real> col(n);
        for (std::size_t r = 0; r < n; ++r) {
          Real v = 0.0;
          if (parse_numeric_cell(table.rows[r][c], &v)) {
            if (!std::isfinite(v))
              throw Error("preprocess: column '" + spec.name + "' contains a non-finite value");
            col[r] = v;
          }  // malformed cells were counted at load; they read as 0
        }
        names.push_back(spec.name);
        columns.push_back(std::move(col));
        break;
      }
      case ColumnKind::categorical: {
        std::vector<std::string> raw(n);
        for (std::size_t r = 0; r < n; ++r) raw[r] = table.rows[r][c];
        const auto distinct = sorted_distinct(raw);
        if (static_cast<int>(distinct.size()) <= opts.onehot_max_cardinality) {
          for (const auto& value : distinct) {
            std::vector<Real> col(n, 0.0);
            for (std::size_t r = 0; r < n; ++r)
              if (raw[r] == value) col[r] = 1.0;
            names.push_back(spec.name + "=" + value);
            columns.push_back(std::move(col));
          }
        } else {
          std::map<std::string, Real> freq;
          for (const auto& v : raw) freq[v] += 1.0;
          std::vector<Real> col(n);
          for (std::size_t r = 0; r < n; ++r) col[r] = freq[raw[r]] / static_cast<Real>(n);
          names.push_back(spec.name + "__freq");
          columns.push_back(std::move(col));
        }
        break;
      }
    }
  }

  // Min-max scale to [0,1]; constant columns go away.
  std::vector<std::size_t> kept;
  for (std::size_t k = 0; k < columns.size(); ++k) {
    auto& col = columns[k];
    Real lo = col[0], hi = col[0];
    for (Real v : col) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (hi == lo) {
      out.dropped_columns.push_back(names[k]);
      continue;
    }
    const Real span = hi - lo;
    for (Real& v : col) v = (v - lo) / span;
    kept.push_back(k);
  }
  if (kept.empty()) throw Error("preprocess: all columns were dropped");

  out.features.data.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(kept.size()));
  out.features.feature_names.reserve(kept.size());
  for (std::size_t j = 0; j < kept.size(); ++j) {
    out.features.feature_names.push_back(names[kept[j]]);
    for (std::size_t r = 0; r < n; ++r)
      out.features.data(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) =
          columns[kept[j]][r];
  }
  return out;
}

Masks stratified_split(const LabelVector& labels, const SplitRatios& ratios,
                       std::uint64_t seed) {
  const Real sum = ratios.train + ratios.val + ratios.test;
  if (!(ratios.train > 0.0 && ratios.val > 0.0 && ratios.test > 0.0))
    throw Error("stratified_split: ratios must be positive");
  if (std::abs(sum - 1.0) > 1e-9)
    throw Error("stratified_split: ratios sum to " + real_to_text(sum) + ", expected 1");

  const std::size_t n = labels.labels.size();
  const int n_classes = labels.n_classes();
  std::vector<std::vector<int>> by_class(n_classes);
  for (std::size_t i = 0; i < n; ++i) by_class[labels.labels[i]].push_back(static_cast<int>(i));
  for (int c = 0; c < n_classes; ++c)
    if (!by_class[c].empty() && by_class[c].size() < 3)
      throw Error("stratified_split: class '" + labels.class_names[c] + "' has " +
                  std::to_string(by_class[c].size()) + " samples; need at least 3");

  Masks masks;
  masks.train.assign(n, 0);
  masks.val.assign(n, 0);
  masks.test.assign(n, 0);

  RngStream rng(seed);
  const Real fracs[3] = {ratios.train, ratios.val, ratios.test};
  for (int c = 0; c < n_classes; ++c) {
    auto& idx = by_class[c];
    if (idx.empty()) continue;
    rng.shuffle(idx);
    const long m = static_cast<long>(idx.size());

    // Largest-remainder counts, then make sure no split is left empty.
    long counts[3];
    Real rema[3];
    long assigned = 0;
    for (int s = 0; s < 3; ++s) {
      const Real quota = fracs[s] * static_cast<Real>(m);
      counts[s] = static_cast<long>(std::floor(quota));
      rema[s] = quota - static_cast<Real>(counts[s]);
      assigned += counts[s];
    }
    while (assigned < m) {
      int best = 0;
      for (int s = 1; s < 3; ++s)
        if (rema[s] > rema[best]) best = s;
      ++counts[best];
      rema[best] = -1.0;
      ++assigned;
    }
    for (int s = 0; s < 3; ++s) {
      while (counts[s] == 0) {
        int donor = 0;
        for (int d = 1; d < 3; ++d)
          if (counts[d] > counts[donor]) donor = d;
        --counts[donor];
        ++counts[s];
      }
    }

    long pos = 0;
    BoolMask* splits[3] = {&masks.train, &masks.val, &masks.test};
    for (int s = 0; s < 3; ++s)
      for (long t = 0; t < counts[s]; ++t) (*splits[s])[idx[pos++]] = 1;
  }
  return masks;
}

RecordTable synth_dataset(int n_per_class, int n_classes, int n_features, Real separation,
                          std::uint64_t seed) {
  if (n_per_class < 1 || n_classes < 1 || n_features < 1)
    throw Error("synth_dataset: counts must be >= 1");
  if (!(separation > 0.0)) throw Error("synth_dataset: separation must be > 0");

  RecordTable table;
  for (int f = 0; f < n_features; ++f)
    table.columns.push_back({"f" + std::to_string(f), ColumnKind::numeric});
  table.columns.push_back({"label", ColumnKind::label});

  RngStream rng(seed);
  table.rows.reserve(static_cast<std::size_t>(n_per_class) * n_classes);
  for (int c = 0; c < n_classes; ++c) {
    // Means sit on one axis each; classes sharing an axis are staggered so
    // every pair of means is at least `separation` apart.
    const int axis = c % n_features;
    const Real level = separation * static_cast<Real>(1 + c / n_features);
    const std::string name = padded_class_name(c, n_classes);
    for (int r = 0; r < n_per_class; ++r) {
      std::vector<std::string> row(static_cast<std::size_t>(n_features) + 1);
      for (int f = 0; f < n_features; ++f) {
        const Real mean = (f == axis) ? level : 0.0;
        row[f] = real_to_text(mean + rng.normal());
      }
      row[n_features] = name;
      table.rows.push_back(std::move(row));
    }
  }
  rng.shuffle(table.rows);
  return table;
}

std::vector<int> stratified_subsample(const LabelVector& labels, long max_records,
                                      std::uint64_t seed) {
  const long n = static_cast<long>(labels.labels.size());
  std::vector<int> keep;
  if (max_records <= 0 || n <= max_records) {
    keep.resize(n);
    for (long i = 0; i < n; ++i) keep[i] = static_cast<int>(i);
    return keep;
  }

  const int n_classes = labels.n_classes();
  std::vector<std::vector<int>> by_class(n_classes);
  for (long i = 0; i < n; ++i) by_class[labels.labels[i]].push_back(static_cast<int>(i));

  // Proportional quotas by largest remainder, each class floored at
  // min(3, size) so downstream splits stay valid.
  std::vector<long> quota(n_classes, 0);
  std::vector<Real> rema(n_classes, 0.0);
  long assigned = 0;
  for (int c = 0; c < n_classes; ++c) {
    const Real share =
        static_cast<Real>(by_class[c].size()) * static_cast<Real>(max_records) / static_cast<Real>(n);
    quota[c] = static_cast<long>(std::floor(share));
    rema[c] = share - static_cast<Real>(quota[c]);
    assigned += quota[c];
  }
  while (assigned < max_records) {
    int best = 0;
    for (int c = 1; c < n_classes; ++c)
      if (rema[c] > rema[best]) best = c;
    ++quota[best];
    rema[best] = -1.0;
    ++assigned;
  }
  for (int c = 0; c < n_classes; ++c) {
    const long floor_c = std::min<long>(3, static_cast<long>(by_class[c].size()));
    while (quota[c] < floor_c) {
      int donor = 0;
      for (int d = 1; d < n_classes; ++d)
        if (quota[d] > quota[donor]) donor = d;
      --quota[donor];
      ++quota[c];
    }
    quota[c] = std::min(quota[c], static_cast<long>(by_class[c].size()));
  }

  RngStream rng(seed);
  for (int c = 0; c < n_classes; ++c) {
    auto& idx = by_class[c];
    rng.shuffle(idx);
    for (long t = 0; t < quota[c]; ++t) keep.push_back(idx[t]);
  }
  std::sort(keep.begin(), keep.end());
  return keep;
}

RecordTable take_rows(const RecordTable& table, const std::vector<int>& indices) {
  RecordTable out;
  out.columns = table.columns;
  out.malformed_numeric_cells = table.malformed_numeric_cells;
  out.rows.reserve(indices.size());
  for (int i : indices) out.rows.push_back(table.rows.at(i));
  return out;
}

void write_features(const std::string& path, const FeatureMatrix& x, const LabelVector& y) {
  const Eigen::Index n = x.data.rows(), f = x.data.cols();
  if (static_cast<Eigen::Index>(y.labels.size()) != n)
    throw Error("write_features: label count mismatch");
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << n << ' ' << f << ' ' << y.n_classes() << '\n';
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < f; ++j) out << real_to_text(x.data(i, j)) << ' ';
    out << y.labels[static_cast<std::size_t>(i)] << '\n';
  }
  if (!out) throw Error("write failed: " + path);
}

std::pair<FeatureMatrix, LabelVector> read_features(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  Eigen::Index n = 0, f = 0;
  int n_classes = 0;
  if (!(in >> n >> f >> n_classes) || n < 1 || f < 1 || n_classes < 2)
    throw Error("bad features header in " + path);
  FeatureMatrix x;
  x.data.resize(n, f);
  for (Eigen::Index j = 0; j < f; ++j) x.feature_names.push_back("f" + std::to_string(j));
  LabelVector y;
  y.labels.resize(static_cast<std::size_t>(n));
  for (int c = 0; c < n_classes; ++c) y.class_names.push_back(padded_class_name(c, n_classes));
  std::string tok;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < f; ++j) {
      if (!(in >> tok)) throw Error("truncated features file " + path);
      x.data(i, j) = text_to_real(tok);
    }
    int label = 0;
    if (!(in >> label)) throw Error("truncated features file " + path);
    if (label < 0 || label >= n_classes)
      throw Error("features file " + path + ": label out of range at node " + std::to_string(i));
    y.labels[static_cast<std::size_t>(i)] = label;
  }
  return {std::move(x), std::move(y)};
}

void write_class_names(const std::string& path, const std::vector<std::string>& names) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  for (const auto& name : names) out << name << '\n';
  if (!out) throw Error("write failed: " + path);
}

std::vector<std::string> read_class_names(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) names.push_back(line);
  }
  return names;
}

}  // namespace mgcn
