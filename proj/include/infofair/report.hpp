#pragma once

// Result records written by the train and ablate commands, and the per-epoch
// CSV log.

#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "infofair/config.hpp"
#include "infofair/metrics.hpp"
#include "infofair/objective.hpp"

namespace infofair {

class ResultError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline nlohmann::json to_json(const MetricsReport& m) {
  nlohmann::json j{{"micro_f1", m.micro_f1},
                   {"macro_f1", m.macro_f1},
                   {"imparity", m.imparity},
                   {"acceptance", m.acceptance}};
  if (m.reduction) j["reduction"] = *m.reduction;
  return j;
}

inline MetricsReport metrics_from_json(const nlohmann::json& j) {
  MetricsReport m;
  m.micro_f1 = j.at("micro_f1").get<double>();
  m.macro_f1 = j.at("macro_f1").get<double>();
  m.imparity = j.at("imparity").get<double>();
  m.acceptance = j.value("acceptance", m.acceptance);
  if (j.contains("reduction")) m.reduction = j.at("reduction").get<double>();
  return m;
}

struct SeedResult {
  std::uint64_t seed = 0;
  std::string split_hash;
  int best_epoch = 0;
  int epochs_run = 0;
  MetricsReport test;
  std::optional<MetricsReport> vanilla;  // reference run on the same split
  std::optional<double> eo_disparity;     // equal-opportunity variant only
  std::string checkpoint;                // relative to the run directory
};

struct Aggregate {
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
  double imparity = 0.0;
  std::optional<double> reduction;
};

struct ResultRecord {
  std::string version = kVersion;
  nlohmann::json config;  // echo of the run configuration
  Variant variant = Variant::TSD;
  double alpha = 0.0;
  std::vector<std::string> sensitive;
  std::vector<SeedResult> runs;
  Aggregate aggregate;
  std::optional<Aggregate> vanilla;
};

/// Arithmetic means over seeds. The reduction mean is taken over per-seed
/// reductions and is only present when every seed has one.
inline Aggregate aggregate_test(const std::vector<SeedResult>& runs) {
  Aggregate a;
  if (runs.empty()) return a;
  bool all_red = true;
  double red = 0.0;
  for (const auto& r : runs) {
    a.micro_f1 += r.test.micro_f1;
    a.macro_f1 += r.test.macro_f1;
    a.imparity += r.test.imparity;
    if (r.test.reduction) {
      red += *r.test.reduction;
    } else {
      all_red = false;
    }
  }
  const auto n = static_cast<double>(runs.size());
  a.micro_f1 /= n;
  a.macro_f1 /= n;
  a.imparity /= n;
  if (all_red) a.reduction = red / n;
  return a;
}

inline std::optional<Aggregate> aggregate_vanilla(const std::vector<SeedResult>& runs) {
  Aggregate a;
  for (const auto& r : runs) {
    if (!r.vanilla) return std::nullopt;
    a.micro_f1 += r.vanilla->micro_f1;
    a.macro_f1 += r.vanilla->macro_f1;
    a.imparity += r.vanilla->imparity;
  }
  if (runs.empty()) return std::nullopt;
  const auto n = static_cast<double>(runs.size());
  a.micro_f1 /= n;
  a.macro_f1 /= n;
  a.imparity /= n;
  return a;
}

inline void finalize(ResultRecord& r) {
  r.aggregate = aggregate_test(r.runs);
  r.vanilla = aggregate_vanilla(r.runs);
}

inline nlohmann::json to_json(const Aggregate& a) {
  nlohmann::json j{{"micro_f1", a.micro_f1}, {"macro_f1", a.macro_f1}, {"imparity", a.imparity}};
  if (a.reduction) j["reduction"] = *a.reduction;
  return j;
}

inline Aggregate aggregate_from_json(const nlohmann::json& j) {
  Aggregate a;
  a.micro_f1 = j.at("micro_f1").get<double>();
  a.macro_f1 = j.at("macro_f1").get<double>();
  a.imparity = j.at("imparity").get<double>();
  if (j.contains("reduction")) a.reduction = j.at("reduction").get<double>();
  return a;
}

inline nlohmann::json to_json(const ResultRecord& r) {
  nlohmann::json j;
  j["version"] = r.version;
  j["variant"] = to_string(r.variant);
  j["alpha"] = r.alpha;
  j["sensitive"] = r.sensitive;
  j["config"] = r.config;
  j["runs"] = nlohmann::json::array();
  for (const auto& s : r.runs) {
    nlohmann::json e{{"seed", s.seed},
                     {"split_hash", s.split_hash},
                     {"best_epoch", s.best_epoch},
                     {"epochs_run", s.epochs_run},
                     {"test", to_json(s.test)},
                     {"checkpoint", s.checkpoint}};
    if (s.vanilla) e["vanilla"] = to_json(*s.vanilla);
    if (s.eo_disparity) e["eo_disparity"] = *s.eo_disparity;
    j["runs"].push_back(e);
  }
  j["aggregate"] = to_json(r.aggregate);
  if (r.vanilla) j["vanilla_aggregate"] = to_json(*r.vanilla);
  return j;
}

inline ResultRecord result_from_json(const nlohmann::json& j) {
  try {
    ResultRecord r;
    r.version = j.at("version").get<std::string>();
    r.variant = parse_variant(j.at("variant").get<std::string>());
    r.alpha = j.at("alpha").get<double>();
    r.sensitive = j.at("sensitive").get<std::vector<std::string>>();
    r.config = j.value("config", nlohmann::json::object());
    for (const auto& e : j.at("runs")) {
      SeedResult s;
      s.seed = e.at("seed").get<std::uint64_t>();
      s.split_hash = e.at("split_hash").get<std::string>();
      s.best_epoch = e.at("best_epoch").get<int>();
      s.epochs_run = e.at("epochs_run").get<int>();
      s.test = metrics_from_json(e.at("test"));
      if (e.contains("vanilla")) s.vanilla = metrics_from_json(e.at("vanilla"));
      s.checkpoint = e.value("checkpoint", std::string());
      if (e.contains("eo_disparity")) s.eo_disparity = e.at("eo_disparity").get<double>();
      r.runs.push_back(std::move(s));
    }
    r.aggregate = aggregate_from_json(j.at("aggregate"));
    if (j.contains("vanilla_aggregate")) r.vanilla = aggregate_from_json(j.at("vanilla_aggregate"));
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ResultError(std::string("malformed result record: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ResultError(std::string("malformed result record: ") + e.what());
  }
}

inline void save_result(const std::string& path, const ResultRecord& r) {
  std::ofstream out(path);
  if (!out) throw ResultError("cannot write " + path);
  out << to_json(r).dump(2) << '\n';
}

inline ResultRecord load_result(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ResultError("cannot open result file " + path);
  try {
    return result_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ResultError(path + ": " + e.what());
  } catch (const ResultError& e) {
    throw ResultError(path + ": " + e.what());
  }
}

/// Per-epoch CSV. The S and D columns are only written when the variant has
/// those terms.
inline void write_epoch_log(std::ostream& out, const std::vector<EpochReport>& log, Variant v) {
  out.precision(17);
  out << "epoch,T";
  if (uses_S(v)) out << ",S";
  if (uses_D(v)) out << ",D";
  out << ",decoder_loss,estimator_loss,tau,val_imparity,val_micro_f1\n";
  for (const auto& r : log) {
    out << r.epoch << ',' << r.T;
    if (uses_S(v)) out << ',' << r.S.value_or(0.0);
    if (uses_D(v)) out << ',' << r.D.value_or(0.0);
    out << ',' << r.decoder_loss << ',' << r.estimator_loss << ',' << r.tau << ',' << r.val_imparity
        << ',' << r.val_micro_f1 << '\n';
  }
}

}  // namespace infofair
