#pragma once

// Tabular ingestion: schema, CSV loading, one-hot encoding, the vectorized
// sensitive attribute and its joint-group index, seeded splits and batches.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace infofair {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ColumnKind { categorical, continuous };

struct FeatureColumn {
  std::string name;
  ColumnKind kind = ColumnKind::continuous;
  std::vector<std::string> categories;  // categorical only
};

struct SensitiveColumn {
  std::string name;
  std::vector<std::string> categories;
};

/// Declares which CSV columns are features, which one is the label, and
/// which ones make up the vectorized sensitive attribute.
struct DatasetSchema {
  std::vector<FeatureColumn> features;
  std::string label;
  std::vector<std::string> label_values;
  std::vector<SensitiveColumn> sensitive;

  void validate() const {
    if (label.empty()) throw DataError("schema: label column missing");
    if (label_values.size() < 2) throw DataError("schema: label needs at least 2 values");
    if (sensitive.empty()) throw DataError("schema: at least one sensitive column required");
    std::vector<std::string> names;
    for (const auto& f : features) {
      if (f.kind == ColumnKind::categorical && f.categories.size() < 2) {
        throw DataError("schema: categorical column '" + f.name + "' needs >= 2 categories");
      }
      names.push_back(f.name);
    }
    for (const auto& s : sensitive) {
      if (s.name == label) throw DataError("schema: sensitive column '" + s.name + "' is the label");
      if (s.categories.size() < 2) {
        throw DataError("schema: sensitive column '" + s.name + "' needs >= 2 categories");
      }
      names.push_back(s.name);
    }
    names.push_back(label);
    auto sorted = names;
    std::sort(sorted.begin(), sorted.end());
    if (auto it = std::adjacent_find(sorted.begin(), sorted.end()); it != sorted.end()) {
      throw DataError("schema: column '" + *it + "' declared more than once");
    }
  }

  std::size_t sensitive_index(const std::string& name) const {
    for (std::size_t i = 0; i < sensitive.size(); ++i)
      if (sensitive[i].name == name) return i;
    throw DataError("schema: no sensitive column named '" + name + "'");
  }

  static DatasetSchema from_json(const nlohmann::json& j) {
    DatasetSchema s;
    for (const auto& f : j.at("features")) {
      FeatureColumn c;
      c.name = f.at("name").get<std::string>();
      const auto kind = f.value("kind", std::string("continuous"));
      if (kind == "categorical") {
        c.kind = ColumnKind::categorical;
        c.categories = f.at("categories").get<std::vector<std::string>>();
      } else if (kind == "continuous") {
        c.kind = ColumnKind::continuous;
      } else {
        throw DataError("schema: unknown column kind '" + kind + "' for " + c.name);
      }
      s.features.push_back(std::move(c));
    }
    s.label = j.at("label").get<std::string>();
    s.label_values = j.at("label_values").get<std::vector<std::string>>();
    for (const auto& c : j.at("sensitive")) {
      s.sensitive.push_back({c.at("name").get<std::string>(),
                             c.at("categories").get<std::vector<std::string>>()});
    }
    s.validate();
    return s;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["features"] = nlohmann::json::array();
    for (const auto& f : features) {
      nlohmann::json c{{"name", f.name},
                       {"kind", f.kind == ColumnKind::categorical ? "categorical" : "continuous"}};
      if (f.kind == ColumnKind::categorical) c["categories"] = f.categories;
      j["features"].push_back(c);
    }
    j["label"] = label;
    j["label_values"] = label_values;
    j["sensitive"] = nlohmann::json::array();
    for (const auto& c : sensitive) j["sensitive"].push_back({{"name", c.name}, {"categories", c.categories}});
    return j;
  }

  static DatasetSchema load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open schema file " + path);
    try {
      return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("schema " + path + ": " + e.what());
    }
  }
};

/// Column-major typed table. Categorical cells hold their category index.
struct RawTable {
  std::size_t rows = 0;
  std::vector<std::vector<double>> features;
  std::vector<int> label;
  std::vector<std::vector<int>> sensitive;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

/// Splits one CSV record; double quotes protect commas and "" escapes a quote.
inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cell += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(trim(cell));
      cell.clear();
    } else {
      cell += ch;
    }
  }
  out.push_back(trim(cell));
  return out;
}

inline int category_index(const std::vector<std::string>& cats, const std::string& v) {
  const auto it = std::find(cats.begin(), cats.end(), v);
  return it == cats.end() ? -1 : static_cast<int>(it - cats.begin());
}

}  // namespace detail

/// Reads a comma-delimited file with a header row. Extra columns are ignored;
/// any cell outside its declared categories, or a non-numeric continuous cell,
/// rejects the file with the offending data row (1-based) and column.
inline RawTable read_csv(std::istream& in, const DatasetSchema& schema,
                         const std::string& source = "<stream>") {
  schema.validate();
  std::string line;
  if (!std::getline(in, line)) throw DataError(source + ": empty file");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = detail::split_csv_line(line);
  auto column = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError(source + ": missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };

  std::vector<std::size_t> feature_cols;
  for (const auto& f : schema.features) feature_cols.push_back(column(f.name));
  const std::size_t label_col = column(schema.label);
  std::vector<std::size_t> sensitive_cols;
  for (const auto& s : schema.sensitive) sensitive_cols.push_back(column(s.name));

  RawTable t;
  t.features.resize(schema.features.size());
  t.sensitive.resize(schema.sensitive.size());
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    ++row;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size()) {
      throw DataError(source + ": row " + std::to_string(row) + " has " +
                      std::to_string(cells.size()) + " fields, header has " +
                      std::to_string(header.size()));
    }
    auto bad = [&](const std::string& col, const std::string& what) {
      return DataError(source + ": row " + std::to_string(row) + ", column '" + col + "': " + what);
    };
    for (std::size_t f = 0; f < schema.features.size(); ++f) {
      const auto& spec = schema.features[f];
      const auto& cell = cells[feature_cols[f]];
      if (spec.kind == ColumnKind::categorical) {
        const int idx = detail::category_index(spec.categories, cell);
        if (idx < 0) throw bad(spec.name, "unknown category '" + cell + "'");
        t.features[f].push_back(idx);
      } else {
        double v = 0.0;
        const auto* end = cell.data() + cell.size();
        const auto [ptr, ec] = std::from_chars(cell.data(), end, v);
        if (cell.empty() || ec != std::errc() || ptr != end || !std::isfinite(v)) {
          throw bad(spec.name, "unparseable number '" + cell + "'");
        }
        t.features[f].push_back(v);
      }
    }
    const int y = detail::category_index(schema.label_values, cells[label_col]);
    if (y < 0) throw bad(schema.label, "unknown label '" + cells[label_col] + "'");
    t.label.push_back(y);
    for (std::size_t s = 0; s < schema.sensitive.size(); ++s) {
      const auto& cell = cells[sensitive_cols[s]];
      const int idx = detail::category_index(schema.sensitive[s].categories, cell);
      if (idx < 0) throw bad(schema.sensitive[s].name, "unknown category '" + cell + "'");
      t.sensitive[s].push_back(idx);
    }
  }
  t.rows = row;
  return t;
}

inline RawTable load_csv(const std::string& path, const DatasetSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset " + path);
  return read_csv(in, schema, path);
}

// ---------------------------------------------------------------------------
// Joint-group index

inline void check_group_args(std::size_t k_idx, std::span<const int> cards) {
  if (k_idx != cards.size()) throw std::out_of_range("group: index/cardinality length mismatch");
  for (int c : cards)
    if (c < 1) throw std::out_of_range("group: cardinality must be >= 1");
}

/// Mixed-radix (row-major) index of a category tuple; the last attribute
/// varies fastest.
inline int map_to_group(std::span<const int> indices, std::span<const int> cards) {
  check_group_args(indices.size(), cards);
  int g = 0;
  for (std::size_t i = 0; i < cards.size(); ++i) {
    if (indices[i] < 0 || indices[i] >= cards[i]) {
      throw std::out_of_range("group: index " + std::to_string(indices[i]) + " of attribute " +
                              std::to_string(i) + " outside [0, " + std::to_string(cards[i]) + ")");
    }
    g = g * cards[i] + indices[i];
  }
  return g;
}

inline int group_count(std::span<const int> cards) {
  return std::accumulate(cards.begin(), cards.end(), 1, std::multiplies<>());
}

/// Inverse of map_to_group.
inline std::vector<int> unmap_group(int group, std::span<const int> cards) {
  check_group_args(cards.size(), cards);
  if (group < 0 || group >= group_count(cards)) {
    throw std::out_of_range("group: " + std::to_string(group) + " outside the product set");
  }
  std::vector<int> idx(cards.size());
  for (std::size_t i = cards.size(); i-- > 0;) {
    idx[i] = group % cards[i];
    group /= cards[i];
  }
  return idx;
}

/// Group index over the attributes at positions `keep` (in that order),
/// derived from a full group index.
inline int project_group(int group, std::span<const int> cards, std::span<const std::size_t> keep) {
  const auto idx = unmap_group(group, cards);
  std::vector<int> sub_idx, sub_cards;
  for (std::size_t k : keep) {
    if (k >= cards.size()) throw std::out_of_range("group: projection position out of range");
    sub_idx.push_back(idx[k]);
    sub_cards.push_back(cards[k]);
  }
  return map_to_group(sub_idx, sub_cards);
}

// ---------------------------------------------------------------------------
// Encoding

struct Standardizer {
  std::vector<std::size_t> columns;  // X columns holding continuous features
  std::vector<double> mean;
  std::vector<double> stddev;
};

struct EncodedDataset {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> X;  // n x d, row-major
  std::vector<std::string> feature_names;
  std::vector<int> y;
  int num_classes = 0;

  // Category codes of every schema sensitive column, n x sensitive_names.size().
  std::vector<std::string> sensitive_names;
  std::vector<int> sensitive_cards;
  std::vector<int> sensitive_codes;

  // The vectorized sensitive attribute being debiased (a subset of the above).
  std::vector<std::size_t> active;
  std::vector<int> cards;
  std::size_t s_width = 0;
  std::vector<double> s_multi;  // n x s_width multi-hot
  std::vector<int> group;
  int group_card = 1;

  std::vector<std::size_t> continuous_columns;
  std::optional<Standardizer> standardizer;  // set once continuous columns are z-scored
  std::vector<std::size_t> source_rows;      // row ids in the loaded table

  double x(std::size_t i, std::size_t j) const { return X[i * d + j]; }
  int code(std::size_t i, std::size_t attr) const {
    return sensitive_codes[i * sensitive_names.size() + attr];
  }
  std::vector<std::string> active_names() const {
    std::vector<std::string> out;
    for (auto a : active) out.push_back(sensitive_names[a]);
    return out;
  }
};

/// Rebuilds s_multi and group for the sensitive columns named in `names`.
inline void set_active_sensitive(EncodedDataset& ds, const std::vector<std::string>& names) {
  if (names.empty()) throw DataError("at least one sensitive attribute must be selected");
  ds.active.clear();
  ds.cards.clear();
  for (const auto& name : names) {
    const auto it = std::find(ds.sensitive_names.begin(), ds.sensitive_names.end(), name);
    if (it == ds.sensitive_names.end()) throw DataError("unknown sensitive attribute '" + name + "'");
    const auto pos = static_cast<std::size_t>(it - ds.sensitive_names.begin());
    if (std::find(ds.active.begin(), ds.active.end(), pos) != ds.active.end()) {
      throw DataError("sensitive attribute '" + name + "' selected twice");
    }
    ds.active.push_back(pos);
    ds.cards.push_back(ds.sensitive_cards[pos]);
  }
  ds.s_width = static_cast<std::size_t>(std::accumulate(ds.cards.begin(), ds.cards.end(), 0));
  ds.group_card = group_count(ds.cards);
  ds.s_multi.assign(ds.n * ds.s_width, 0.0);
  ds.group.assign(ds.n, 0);
  std::vector<int> idx(ds.active.size());
  for (std::size_t i = 0; i < ds.n; ++i) {
    std::size_t offset = 0;
    for (std::size_t a = 0; a < ds.active.size(); ++a) {
      idx[a] = ds.code(i, ds.active[a]);
      ds.s_multi[i * ds.s_width + offset + static_cast<std::size_t>(idx[a])] = 1.0;
      offset += static_cast<std::size_t>(ds.cards[a]);
    }
    ds.group[i] = map_to_group(idx, ds.cards);
  }
}

struct EncodeOptions {
  bool include_sensitive_in_features = true;
  std::vector<std::string> sensitive;  // empty selects every schema sensitive column
};

/// One-hot categorical blocks and raw continuous columns in schema order,
/// followed by one-hot sensitive blocks when requested. Continuous columns are
/// left unscaled; split() standardizes them with training statistics.
inline EncodedDataset encode(const RawTable& table, const DatasetSchema& schema,
                             const EncodeOptions& options = {}) {
  schema.validate();
  EncodedDataset ds;
  ds.n = table.rows;
  ds.num_classes = static_cast<int>(schema.label_values.size());
  ds.y = table.label;

  for (std::size_t f = 0; f < schema.features.size(); ++f) {
    const auto& spec = schema.features[f];
    if (spec.kind == ColumnKind::categorical) {
      for (const auto& c : spec.categories) ds.feature_names.push_back(spec.name + "=" + c);
    } else {
      const auto& col = table.features[f];
      const auto [lo, hi] = std::minmax_element(col.begin(), col.end());
      if (col.empty() || *lo == *hi) {
        throw DataError("continuous column '" + spec.name + "' has zero variance");
      }
      ds.continuous_columns.push_back(ds.feature_names.size());
      ds.feature_names.push_back(spec.name);
    }
  }
  if (options.include_sensitive_in_features) {
    for (const auto& s : schema.sensitive)
      for (const auto& c : s.categories) ds.feature_names.push_back(s.name + "=" + c);
  }
  ds.d = ds.feature_names.size();
  ds.X.assign(ds.n * ds.d, 0.0);

  for (std::size_t i = 0; i < ds.n; ++i) {
    std::size_t col = 0;
    double* row = ds.X.data() + i * ds.d;
    for (std::size_t f = 0; f < schema.features.size(); ++f) {
      const auto& spec = schema.features[f];
      if (spec.kind == ColumnKind::categorical) {
        row[col + static_cast<std::size_t>(table.features[f][i])] = 1.0;
        col += spec.categories.size();
      } else {
        row[col++] = table.features[f][i];
      }
    }
    if (options.include_sensitive_in_features) {
      for (std::size_t s = 0; s < schema.sensitive.size(); ++s) {
        row[col + static_cast<std::size_t>(table.sensitive[s][i])] = 1.0;
        col += schema.sensitive[s].categories.size();
      }
    }
  }

  for (const auto& s : schema.sensitive) {
    ds.sensitive_names.push_back(s.name);
    ds.sensitive_cards.push_back(static_cast<int>(s.categories.size()));
  }
  const std::size_t k = schema.sensitive.size();
  ds.sensitive_codes.resize(ds.n * k);
  for (std::size_t i = 0; i < ds.n; ++i)
    for (std::size_t s = 0; s < k; ++s) ds.sensitive_codes[i * k + s] = table.sensitive[s][i];

  ds.source_rows.resize(ds.n);
  std::iota(ds.source_rows.begin(), ds.source_rows.end(), std::size_t{0});

  std::vector<std::string> active = options.sensitive;
  if (active.empty()) active = ds.sensitive_names;
  set_active_sensitive(ds, active);
  return ds;
}

/// Mean and population standard deviation of each continuous column over `rows`.
inline Standardizer fit_standardizer(const EncodedDataset& ds, std::span<const std::size_t> rows) {
  Standardizer st;
  st.columns = ds.continuous_columns;
  for (std::size_t c : ds.continuous_columns) {
    double m = 0.0;
    for (std::size_t r : rows) m += ds.x(r, c);
    m /= static_cast<double>(rows.size());
    double var = 0.0;
    for (std::size_t r : rows) var += (ds.x(r, c) - m) * (ds.x(r, c) - m);
    var /= static_cast<double>(rows.size());
    if (!(var > 0.0)) {
      throw DataError("continuous column '" + ds.feature_names[c] +
                      "' has zero variance on the training split");
    }
    st.mean.push_back(m);
    st.stddev.push_back(std::sqrt(var));
  }
  return st;
}

inline void apply_standardizer(EncodedDataset& ds, const Standardizer& st) {
  if (ds.standardizer) throw DataError("dataset is already standardized");
  if (st.columns != ds.continuous_columns) throw DataError("standardizer does not match dataset columns");
  for (std::size_t i = 0; i < ds.n; ++i)
    for (std::size_t k = 0; k < st.columns.size(); ++k) {
      double& v = ds.X[i * ds.d + st.columns[k]];
      v = (v - st.mean[k]) / st.stddev[k];
    }
  ds.standardizer = st;
}

/// Copy restricted to `rows`, in the given order.
inline EncodedDataset subset_rows(const EncodedDataset& ds, std::span<const std::size_t> rows) {
  EncodedDataset out = ds;
  out.n = rows.size();
  const std::size_t k = ds.sensitive_names.size();
  out.X.resize(out.n * ds.d);
  out.y.resize(out.n);
  out.sensitive_codes.resize(out.n * k);
  out.s_multi.resize(out.n * ds.s_width);
  out.group.resize(out.n);
  out.source_rows.resize(out.n);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t r = rows[i];
    if (r >= ds.n) throw DataError("subset_rows: row out of range");
    std::copy_n(ds.X.begin() + static_cast<std::ptrdiff_t>(r * ds.d), ds.d,
                out.X.begin() + static_cast<std::ptrdiff_t>(i * ds.d));
    std::copy_n(ds.sensitive_codes.begin() + static_cast<std::ptrdiff_t>(r * k), k,
                out.sensitive_codes.begin() + static_cast<std::ptrdiff_t>(i * k));
    std::copy_n(ds.s_multi.begin() + static_cast<std::ptrdiff_t>(r * ds.s_width), ds.s_width,
                out.s_multi.begin() + static_cast<std::ptrdiff_t>(i * ds.s_width));
    out.y[i] = ds.y[r];
    out.group[i] = ds.group[r];
    out.source_rows[i] = ds.source_rows[r];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Splits and batches

struct SplitSpec {
  double train = 0.7;
  double validation = 0.1;
  double test = 0.2;
  std::uint64_t seed = 0;
};

struct DataSplits {
  EncodedDataset train;
  EncodedDataset validation;
  EncodedDataset test;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> validation_rows;
  std::vector<std::size_t> test_rows;

  /// FNV-1a digest of the row assignment, for protocol-parity checks.
  std::string hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&](std::uint64_t v) {
      for (int b = 0; b < 8; ++b) {
        h ^= (v >> (8 * b)) & 0xFFu;
        h *= 1099511628211ULL;
      }
    };
    for (const auto* rows : {&train_rows, &validation_rows, &test_rows}) {
      mix(rows->size());
      for (auto r : *rows) mix(r);
    }
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
  }
};

/// Seeded shuffle into train/validation/test. Train and validation sizes are
/// rounded, test takes the remainder. Continuous columns of all three parts are
/// standardized with training statistics.
inline DataSplits split(const EncodedDataset& ds, const SplitSpec& spec) {
  if (!(spec.train > 0 && spec.validation > 0 && spec.test > 0) ||
      std::abs(spec.train + spec.validation + spec.test - 1.0) > 1e-9) {
    throw DataError("split fractions must be positive and sum to 1");
  }
  if (ds.n < 10) throw DataError("split needs at least 10 rows, got " + std::to_string(ds.n));
  if (ds.standardizer) throw DataError("split expects unstandardized data");

  std::vector<std::size_t> order(ds.n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(spec.seed);
  std::shuffle(order.begin(), order.end(), rng);

  const auto n = static_cast<double>(ds.n);
  const auto n_train = static_cast<std::size_t>(std::llround(spec.train * n));
  const auto n_val = static_cast<std::size_t>(std::llround(spec.validation * n));
  if (n_train == 0 || n_val == 0 || n_train + n_val >= ds.n) throw DataError("split produced an empty part");

  DataSplits s;
  s.train_rows.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.validation_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                           order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());

  const Standardizer st = fit_standardizer(ds, s.train_rows);
  s.train = subset_rows(ds, s.train_rows);
  s.validation = subset_rows(ds, s.validation_rows);
  s.test = subset_rows(ds, s.test_rows);
  apply_standardizer(s.train, st);
  apply_standardizer(s.validation, st);
  apply_standardizer(s.test, st);
  return s;
}

/// Shuffled mini-batches of row indices for one epoch. The permutation depends
/// only on (seed, epoch); the last batch may be short.
inline std::vector<std::vector<std::size_t>> batches(std::size_t n, std::size_t batch_size,
                                                     std::uint64_t seed, std::uint64_t epoch) {
  if (batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(epoch >> 32),
                    0xba7c4u};
  std::mt19937_64 rng(seq);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t b = 0; b < n; b += batch_size) {
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(b),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(n, b + batch_size)));
  }
  return out;
}

}  // namespace infofair
