#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace infofair {

struct F1Scores {
  double micro = 0.0;
  double macro = 0.0;
};

namespace detail {

inline void check_labels(std::span<const int> labels, int classes, const char* what) {
  for (int v : labels) {
    if (v < 0 || v >= classes) {
      throw std::out_of_range(std::string(what) + " value " + std::to_string(v) + " outside [0, " +
                              std::to_string(classes) + ")");
    }
  }
}

inline double f1(double tp, double fp, double fn) {
  const double denom = 2.0 * tp + fp + fn;
  return denom == 0.0 ? 0.0 : 2.0 * tp / denom;
}

}  // namespace detail

/// Micro F1 pools true/false positive counts over classes; macro F1 averages
/// the per-class F1 (a class with no support and no predictions scores 0).
inline F1Scores micro_macro_f1(std::span<const int> pred, std::span<const int> truth, int classes) {
  if (pred.size() != truth.size()) throw std::invalid_argument("f1: prediction/label length mismatch");
  if (classes < 1) throw std::invalid_argument("f1: need at least one class");
  detail::check_labels(pred, classes, "prediction");
  detail::check_labels(truth, classes, "label");
  const auto c = static_cast<std::size_t>(classes);
  std::vector<double> tp(c, 0.0), fp(c, 0.0), fn(c, 0.0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const auto p = static_cast<std::size_t>(pred[i]);
    const auto t = static_cast<std::size_t>(truth[i]);
    if (p == t) {
      tp[p] += 1;
    } else {
      fp[p] += 1;
      fn[t] += 1;
    }
  }
  F1Scores s;
  double TP = 0, FP = 0, FN = 0;
  for (std::size_t k = 0; k < c; ++k) {
    TP += tp[k];
    FP += fp[k];
    FN += fn[k];
    s.macro += detail::f1(tp[k], fp[k], fn[k]);
  }
  s.macro /= static_cast<double>(c);
  s.micro = detail::f1(TP, FP, FN);
  return s;
}

/// rates[g][c] = Pr(prediction = c | group = g). Every group must be nonempty.
inline std::vector<std::vector<double>> acceptance_rates(std::span<const int> pred,
                                                         std::span<const int> groups, int classes,
                                                         int group_count) {
  if (pred.size() != groups.size()) throw std::invalid_argument("prediction/group length mismatch");
  detail::check_labels(pred, classes, "prediction");
  detail::check_labels(groups, group_count, "group");
  const auto G = static_cast<std::size_t>(group_count);
  const auto C = static_cast<std::size_t>(classes);
  std::vector<std::vector<double>> rates(G, std::vector<double>(C, 0.0));
  std::vector<double> size(G, 0.0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const auto g = static_cast<std::size_t>(groups[i]);
    rates[g][static_cast<std::size_t>(pred[i])] += 1;
    size[g] += 1;
  }
  for (std::size_t g = 0; g < G; ++g) {
    if (size[g] == 0) throw std::domain_error("group " + std::to_string(g) + " has no samples");
    for (auto& r : rates[g]) r /= size[g];
  }
  return rates;
}

/// Mean over every class and every unordered pair of distinct groups of the
/// absolute gap in acceptance rates.
inline double imparity(std::span<const int> pred, std::span<const int> groups, int classes,
                       int group_count) {
  if (group_count < 2) throw std::invalid_argument("imparity needs at least 2 groups");
  const auto rates = acceptance_rates(pred, groups, classes, group_count);
  double total = 0.0;
  std::size_t terms = 0;
  for (std::size_t c = 0; c < static_cast<std::size_t>(classes); ++c)
    for (std::size_t a = 0; a < rates.size(); ++a)
      for (std::size_t b = a + 1; b < rates.size(); ++b) {
        total += std::abs(rates[a][c] - rates[b][c]);
        ++terms;
      }
  return total / static_cast<double>(terms);
}

/// 1 - debiased / vanilla; negative when bias was amplified.
inline double reduction(double imparity_vanilla, double imparity_debiased) {
  if (!(imparity_vanilla > 0.0)) throw std::domain_error("reduction undefined for zero vanilla imparity");
  return 1.0 - imparity_debiased / imparity_vanilla;
}

/// Mean absolute pairwise gap of true-positive rates Pr(pred = 1 | group, y = 1)
/// for binary labels.
inline double eo_disparity(std::span<const int> pred, std::span<const int> groups,
                           std::span<const int> truth, int group_count) {
  if (pred.size() != groups.size() || pred.size() != truth.size()) {
    throw std::invalid_argument("eo_disparity: length mismatch");
  }
  if (group_count < 2) throw std::invalid_argument("eo_disparity needs at least 2 groups");
  detail::check_labels(pred, 2, "prediction");
  detail::check_labels(truth, 2, "label");
  detail::check_labels(groups, group_count, "group");
  const auto G = static_cast<std::size_t>(group_count);
  std::vector<double> hits(G, 0.0), positives(G, 0.0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (truth[i] != 1) continue;
    const auto g = static_cast<std::size_t>(groups[i]);
    positives[g] += 1;
    hits[g] += pred[i] == 1 ? 1 : 0;
  }
  std::vector<double> tpr(G);
  for (std::size_t g = 0; g < G; ++g) {
    if (positives[g] == 0) throw std::domain_error("group " + std::to_string(g) + " has no positives");
    tpr[g] = hits[g] / positives[g];
  }
  double total = 0.0;
  std::size_t terms = 0;
  for (std::size_t a = 0; a < G; ++a)
    for (std::size_t b = a + 1; b < G; ++b) {
      total += std::abs(tpr[a] - tpr[b]);
      ++terms;
    }
  return total / static_cast<double>(terms);
}

struct MetricsReport {
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
  double imparity = 0.0;
  std::optional<double> reduction;
  std::vector<std::vector<double>> acceptance;  // group x class
};

inline MetricsReport evaluate_predictions(std::span<const int> pred, std::span<const int> truth,
                                          std::span<const int> groups, int classes, int group_count) {
  MetricsReport r;
  const auto f1 = micro_macro_f1(pred, truth, classes);
  r.micro_f1 = f1.micro;
  r.macro_f1 = f1.macro;
  r.acceptance = acceptance_rates(pred, groups, classes, group_count);
  r.imparity = imparity(pred, groups, classes, group_count);
  return r;
}

}  // namespace infofair
