#pragma once

// Generator for a biased tabular dataset with two sensitive attributes
// (gender: 2 values, race: 3 values) whose labels depend on group membership.

#include <cmath>
#include <cstdint>
#include <ostream>
#include <random>
#include <string>

#include "infofair/data.hpp"

namespace infofair {

struct SyntheticOptions {
  std::size_t n = 4000;
  std::uint64_t seed = 2024;
  double group_bias = 1.0;  // scale of the injected label-group correlation
  double signal = 0.5;      // scale of the group-independent feature effect
};

inline DatasetSchema synthetic_schema() {
  DatasetSchema s;
  s.features = {{"x1", ColumnKind::continuous, {}},
                {"x2", ColumnKind::continuous, {}},
                {"x3", ColumnKind::continuous, {}},
                {"proxy", ColumnKind::continuous, {}},
                {"sector", ColumnKind::categorical, {"public", "private", "self"}}};
  s.label = "outcome";
  s.label_values = {"no", "yes"};
  s.sensitive = {{"gender", {"female", "male"}}, {"race", {"a", "b", "c"}}};
  return s;
}

/// Labels follow a logistic model of the features plus a group offset; the
/// `proxy` feature leaks group membership.
inline RawTable synthetic_table(const SyntheticOptions& opt) {
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  std::discrete_distribution<int> race({0.5, 0.3, 0.2});
  std::discrete_distribution<int> sector({0.5, 0.35, 0.15});
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double gender_offset[2] = {-0.6, 0.6};
  const double race_offset[3] = {0.5, -0.1, -0.8};

  RawTable t;
  t.rows = opt.n;
  t.features.resize(5);
  t.sensitive.resize(2);
  for (std::size_t i = 0; i < opt.n; ++i) {
    const int g = coin(rng) ? 1 : 0;
    const int r = race(rng);
    const double x1 = normal(rng), x2 = normal(rng), x3 = normal(rng);
    const double proxy = 0.8 * (2 * g - 1) + 0.5 * race_offset[r] + normal(rng);
    const int sec = sector(rng);
    const double logit = opt.signal * (1.5 * x1 - 1.0 * x2 + 0.5 * x3 + (sec == 2 ? 0.4 : 0.0)) +
                         opt.group_bias * (gender_offset[g] + race_offset[r]);
    const int y = unif(rng) < 1.0 / (1.0 + std::exp(-logit)) ? 1 : 0;
    t.features[0].push_back(x1);
    t.features[1].push_back(x2);
    t.features[2].push_back(x3);
    t.features[3].push_back(proxy);
    t.features[4].push_back(sec);
    t.label.push_back(y);
    t.sensitive[0].push_back(g);
    t.sensitive[1].push_back(r);
  }
  return t;
}

/// Writes a table as CSV in the column order of the schema.
inline void write_csv(std::ostream& out, const RawTable& t, const DatasetSchema& s) {
  out.precision(17);
  bool first = true;
  auto sep = [&] {
    if (!first) out << ',';
    first = false;
  };
  for (const auto& f : s.features) sep(), out << f.name;
  for (const auto& c : s.sensitive) sep(), out << c.name;
  sep(), out << s.label;
  out << '\n';
  for (std::size_t i = 0; i < t.rows; ++i) {
    first = true;
    for (std::size_t f = 0; f < s.features.size(); ++f) {
      sep();
      if (s.features[f].kind == ColumnKind::categorical) {
        out << s.features[f].categories[static_cast<std::size_t>(t.features[f][i])];
      } else {
        out << t.features[f][i];
      }
    }
    for (std::size_t c = 0; c < s.sensitive.size(); ++c)
      sep(), out << s.sensitive[c].categories[static_cast<std::size_t>(t.sensitive[c][i])];
    sep(), out << s.label_values[static_cast<std::size_t>(t.label[i])];
    out << '\n';
  }
}

}  // namespace infofair
