#pragma once

// The command layer behind the CLI: train, evaluate, ablate, oracle, plot,
// synth. Every command throws on failure; the CLI turns that into a one-line
// diagnostic and a nonzero exit code.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "infofair/checkpoint.hpp"
#include "infofair/config.hpp"
#include "infofair/data.hpp"
#include "infofair/metrics.hpp"
#include "infofair/objective.hpp"
#include "infofair/oracle.hpp"
#include "infofair/plot.hpp"
#include "infofair/report.hpp"
#include "infofair/synthetic.hpp"

namespace infofair {

namespace fs = std::filesystem;

struct CommandOptions {
  unsigned jobs = 1;
  std::ostream* log = nullptr;  // progress lines; null for silence
};

namespace detail {

class LockedLog {
 public:
  explicit LockedLog(std::ostream* out) : out_(out) {}
  void line(const std::string& s) {
    if (!out_) return;
    std::lock_guard<std::mutex> lock(mu_);
    *out_ << s << '\n';
  }
  WarningSink sink() {
    return [this](const std::string& msg) { line("warning: " + msg); };
  }

 private:
  std::ostream* out_;
  std::mutex mu_;
};

/// Runs task(i) for i in [0, n) on up to `jobs` threads.
inline void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& task) {
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n)));
  if (jobs <= 1) {
    for (std::size_t i = 0; i < n; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < jobs; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          task(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec || !fs::is_directory(p)) throw ConfigError("cannot create output directory " + p.string());
}

struct VariantRun {
  FitResult fit;
  MetricsReport test;
  std::optional<double> test_eo;
};

inline std::optional<double> try_eo(const ModelBundle& m, const EncodedDataset& ds) {
  if (ds.num_classes != 2) return std::nullopt;
  try {
    return eo_disparity(predict(m, ds), ds.group, ds.y, ds.group_card);
  } catch (const std::domain_error&) {
    return std::nullopt;
  }
}

inline nlohmann::json checkpoint_meta(const RunConfig& cfg, const TrainConfig& tc, const DataSplits& splits,
                                      const EncodedDataset& ds, std::uint64_t seed, int best_epoch) {
  nlohmann::json m;
  m["version"] = kVersion;
  m["variant"] = to_string(tc.variant);
  m["alpha"] = tc.alpha;
  m["seed"] = seed;
  m["best_epoch"] = best_epoch;
  m["source"] = to_json(cfg.source);
  m["sensitive"] = ds.active_names();
  m["include_sensitive_in_features"] = cfg.include_sensitive_in_features;
  m["split"] = {cfg.train_fraction, cfg.validation_fraction, cfg.test_fraction};
  m["split_hash"] = splits.hash();
  m["standardizer"] = to_json(splits.train.standardizer.value_or(Standardizer{}));
  m["feature_names"] = ds.feature_names;
  m["train"] = to_json(tc);
  return m;
}

/// Fits one variant on one seed's split and writes its log and checkpoint
/// into `dir`.
inline VariantRun run_variant(const RunConfig& cfg, const EncodedDataset& ds, const DataSplits& splits,
                              Variant v, std::uint64_t seed, const fs::path& dir, LockedLog& log) {
  TrainConfig tc = cfg.train;
  tc.variant = v;
  VariantRun out;
  out.fit = fit(splits, tc, seed, {}, log.sink());
  out.test = evaluate_model(out.fit.best, splits.test);
  if (v == Variant::EO_TSD) out.test_eo = try_eo(out.fit.best, splits.test);

  ensure_dir(dir);
  {
    std::ofstream csv(dir / "epochs.csv");
    if (!csv) throw ConfigError("cannot write " + (dir / "epochs.csv").string());
    write_epoch_log(csv, out.fit.log, v);
  }
  save_checkpoint((dir / "model.ckpt").string(),
                  {out.fit.best, checkpoint_meta(cfg, tc, splits, ds, seed, out.fit.best_epoch)});
  std::ostringstream msg;
  msg.precision(4);
  msg << "seed " << seed << " " << to_string(v) << ": best epoch " << out.fit.best_epoch << " of "
      << out.fit.log.size() << ", test micro-F1 " << out.test.micro_f1 << ", imparity " << out.test.imparity;
  log.line(msg.str());
  return out;
}

inline SeedResult seed_result(std::uint64_t seed, const DataSplits& splits, const VariantRun& run,
                              const std::optional<VariantRun>& vanilla, const std::string& ckpt,
                              LockedLog& log) {
  SeedResult r;
  r.seed = seed;
  r.split_hash = splits.hash();
  r.best_epoch = run.fit.best_epoch;
  r.epochs_run = static_cast<int>(run.fit.log.size());
  r.test = run.test;
  r.eo_disparity = run.test_eo;
  r.checkpoint = ckpt;
  if (vanilla) {
    r.vanilla = vanilla->test;
    if (vanilla->test.imparity > 0.0) {
      r.test.reduction = reduction(vanilla->test.imparity, run.test.imparity);
    } else {
      log.line("warning: seed " + std::to_string(seed) + ": vanilla imparity is 0, reduction undefined");
    }
  }
  return r;
}

inline std::string seed_dir(std::uint64_t seed) { return "seed_" + std::to_string(seed); }

inline LoadedData load_for(const RunConfig& cfg) {
  validate(cfg);
  LoadedData data = load_data(cfg.source, cfg.sensitive, cfg.include_sensitive_in_features);
  try {
    cfg.train.validate(data.dataset.num_classes);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (data.dataset.group_card < 2) throw ConfigError("the selected sensitive attributes form a single group");
  return data;
}

inline ResultRecord make_record(const RunConfig& cfg, Variant v, const EncodedDataset& ds) {
  RunConfig echo = cfg;
  echo.train.variant = v;
  ResultRecord r;
  r.config = to_json(echo);
  r.variant = v;
  r.alpha = v == Variant::VANILLA ? 0.0 : cfg.train.alpha;
  r.sensitive = ds.active_names();
  return r;
}

}  // namespace detail

/// Fits the configured variant for every seed, plus a VANILLA reference on the
/// same split when the variant is not VANILLA itself. Writes
///   <out>/result.json
///   <out>/seed_<k>/{epochs.csv, model.ckpt}
///   <out>/seed_<k>/vanilla/{epochs.csv, model.ckpt}
inline ResultRecord cmd_train(const RunConfig& cfg, const CommandOptions& opt = {}) {
  const LoadedData data = detail::load_for(cfg);
  const EncodedDataset& ds = data.dataset;
  const fs::path out(cfg.out_dir);
  detail::ensure_dir(out);
  detail::LockedLog log(opt.log);
  const Variant v = cfg.train.variant;
  const auto& seeds = cfg.train.seeds;

  ResultRecord record = detail::make_record(cfg, v, ds);
  record.runs.resize(seeds.size());
  detail::parallel_for(seeds.size(), opt.jobs, [&](std::size_t i) {
    const auto seed = seeds[i];
    const DataSplits splits = split(ds, cfg.split_spec(seed));
    const fs::path dir = out / detail::seed_dir(seed);
    const auto run = detail::run_variant(cfg, ds, splits, v, seed, dir, log);
    std::optional<detail::VariantRun> vanilla;
    if (v != Variant::VANILLA) {
      vanilla = detail::run_variant(cfg, ds, splits, Variant::VANILLA, seed, dir / "vanilla", log);
    }
    record.runs[i] = detail::seed_result(seed, splits, run, vanilla,
                                         detail::seed_dir(seed) + "/model.ckpt", log);
  });
  finalize(record);
  save_result((out / "result.json").string(), record);
  return record;
}

/// TSD, TS and TD on identical splits and seeds, sharing one VANILLA
/// reference per seed. Writes <out>/{tsd,ts,td}/result.json and
/// <out>/vanilla/seed_<k>/...
inline std::vector<ResultRecord> cmd_ablate(const RunConfig& cfg, const CommandOptions& opt = {}) {
  const LoadedData data = detail::load_for(cfg);
  const EncodedDataset& ds = data.dataset;
  const fs::path out(cfg.out_dir);
  detail::ensure_dir(out);
  detail::LockedLog log(opt.log);
  const std::vector<Variant> variants{Variant::TSD, Variant::TS, Variant::TD};
  const auto& seeds = cfg.train.seeds;

  std::vector<ResultRecord> records;
  for (auto v : variants) {
    records.push_back(detail::make_record(cfg, v, ds));
    records.back().runs.resize(seeds.size());
  }
  detail::parallel_for(seeds.size(), opt.jobs, [&](std::size_t i) {
    const auto seed = seeds[i];
    const DataSplits splits = split(ds, cfg.split_spec(seed));
    const auto vanilla = detail::run_variant(cfg, ds, splits, Variant::VANILLA, seed,
                                             out / "vanilla" / detail::seed_dir(seed), log);
    for (std::size_t k = 0; k < variants.size(); ++k) {
      const std::string name = to_string(variants[k]);
      const auto run =
          detail::run_variant(cfg, ds, splits, variants[k], seed, out / name / detail::seed_dir(seed), log);
      records[k].runs[i] =
          detail::seed_result(seed, splits, run, vanilla, detail::seed_dir(seed) + "/model.ckpt", log);
    }
  });
  for (std::size_t k = 0; k < variants.size(); ++k) {
    finalize(records[k]);
    const fs::path dir = out / to_string(variants[k]);
    detail::ensure_dir(dir);
    save_result((dir / "result.json").string(), records[k]);
  }
  return records;
}

struct EvaluationResult {
  std::vector<std::string> sensitive;
  MetricsReport metrics;
  std::optional<double> eo_disparity;
};

struct EvaluateRequest {
  std::string checkpoint;
  std::optional<DataSource> source;                  // defaults to the training data
  std::vector<std::vector<std::string>> partitions;  // empty: the trained attribute set
};

/// Scores a stored model on the test split it was selected for, once per
/// requested attribute partition. No parameters change. If the data no
/// longer reproduces the stored split, every row is scored using the stored
/// standardization instead.
inline std::vector<EvaluationResult> cmd_evaluate(const EvaluateRequest& req, const CommandOptions& opt = {}) {
  detail::LockedLog log(opt.log);
  const Checkpoint ck = load_checkpoint(req.checkpoint);
  DataSource source;
  std::vector<std::string> trained;
  bool include = true;
  std::vector<double> fractions;
  std::uint64_t seed = 0;
  std::string stored_hash;
  Standardizer stored_st;
  try {
    source = req.source ? *req.source : DataSource{};
    if (!req.source) {
      const auto& s = ck.meta.at("source");
      if (s.contains("synthetic")) {
        source.synthetic = synthetic_from_json(s.at("synthetic"));
      } else {
        source.data_path = s.at("data").get<std::string>();
        source.schema_path = s.at("schema").get<std::string>();
      }
    }
    trained = ck.meta.at("sensitive").get<std::vector<std::string>>();
    include = ck.meta.at("include_sensitive_in_features").get<bool>();
    fractions = ck.meta.at("split").get<std::vector<double>>();
    seed = ck.meta.at("seed").get<std::uint64_t>();
    stored_hash = ck.meta.at("split_hash").get<std::string>();
    stored_st = standardizer_from_json(ck.meta.at("standardizer"));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint metadata incomplete: ") + e.what());
  }

  const LoadedData data = load_data(source, trained, include);
  const EncodedDataset& ds = data.dataset;
  const auto& dims = ck.bundle.dims;
  if (ds.d != dims.extractor.input_dim || static_cast<std::size_t>(ds.num_classes) != dims.num_classes) {
    throw DimensionError("checkpoint expects " + std::to_string(dims.extractor.input_dim) + " features and " +
                         std::to_string(dims.num_classes) + " classes, dataset has " + std::to_string(ds.d) +
                         " and " + std::to_string(ds.num_classes));
  }

  EncodedDataset scored;
  std::optional<DataSplits> splits;
  if (ds.n >= 10) splits = split(ds, {fractions.at(0), fractions.at(1), fractions.at(2), seed});
  if (splits && splits->hash() == stored_hash) {
    scored = std::move(splits->test);
  } else {
    log.line("warning: data does not reproduce the training split; scoring all rows");
    scored = ds;
    apply_standardizer(scored, stored_st);
  }

  auto partitions = req.partitions;
  if (partitions.empty()) partitions.push_back(trained);
  std::vector<EvaluationResult> results;
  for (const auto& names : partitions) {
    EncodedDataset view = scored;
    set_active_sensitive(view, names);
    if (view.group_card < 2) throw DataError("evaluation partition needs at least 2 groups");
    EvaluationResult r;
    r.sensitive = names;
    r.metrics = evaluate_model(ck.bundle, view);
    r.eo_disparity = detail::try_eo(ck.bundle, view);
    results.push_back(std::move(r));
  }
  return results;
}

inline nlohmann::json to_json(const EvaluationResult& r) {
  nlohmann::json j = to_json(r.metrics);
  j["sensitive"] = r.sensitive;
  if (r.eo_disparity) j["eo_disparity"] = *r.eo_disparity;
  return j;
}

struct OracleRequest {
  std::uint64_t seed = 0;
  std::size_t trials = 100;
  std::string joint_path;  // optional user joint
  std::string q_path;      // optional conditional for the user joint
};

struct OracleReport {
  std::vector<SuiteResult> suites;
  std::optional<double> joint_mi;
  std::optional<VariationalTerms> joint_terms;
  bool passed = true;
};

/// Reads "A B" then A*B numbers (a conditional table, rows summing to 1).
inline std::vector<double> read_conditional(std::istream& in, std::size_t A, std::size_t B) {
  std::size_t a = 0, b = 0;
  if (!(in >> a >> b)) throw PreconditionError("q: missing dimension header");
  if (a != A || b != B) {
    throw PreconditionError("q is " + std::to_string(a) + "x" + std::to_string(b) + " but the joint is " +
                            std::to_string(A) + "x" + std::to_string(B));
  }
  std::vector<double> q(A * B);
  for (auto& v : q)
    if (!(in >> v)) throw PreconditionError("q: expected " + std::to_string(A * B) + " entries");
  return q;
}

inline OracleReport cmd_oracle(const OracleRequest& req) {
  OracleReport rep;
  rep.suites = {decomposition_suite(req.seed, req.trials), monotonicity_suite(req.seed, req.trials),
                independence_suite(req.seed, req.trials)};
  for (const auto& s : rep.suites) rep.passed = rep.passed && s.passed;
  if (!req.joint_path.empty()) {
    std::ifstream in(req.joint_path);
    if (!in) throw PreconditionError("cannot open joint file " + req.joint_path);
    const DiscreteJoint j = read_joint(in);
    rep.joint_mi = brute_mi(j);
    if (!req.q_path.empty()) {
      std::ifstream qin(req.q_path);
      if (!qin) throw PreconditionError("cannot open q file " + req.q_path);
      const auto q = read_conditional(qin, j.A, j.B);
      rep.joint_terms = variational_decomposition(j, q);
      const double residual = std::abs(rep.joint_terms->total - *rep.joint_mi);
      rep.passed = rep.passed && residual < 1e-10;
    }
  } else if (!req.q_path.empty()) {
    throw PreconditionError("--q needs --joint");
  }
  return rep;
}

inline void print_oracle(std::ostream& out, const OracleReport& rep) {
  out.precision(3);
  for (const auto& s : rep.suites) {
    out << (s.passed ? "PASS " : "FAIL ") << s.name << ": " << s.cases << " cases, worst " << std::scientific
        << s.worst << " (tolerance " << s.tolerance << ")" << std::defaultfloat << '\n';
  }
  out.precision(12);
  if (rep.joint_mi) out << "joint MI (nats): " << *rep.joint_mi << '\n';
  if (rep.joint_terms) {
    const auto& t = *rep.joint_terms;
    out << "H(s) " << t.entropy_s << ", E[log q] " << t.log_lik << ", E[log ratio] " << t.log_ratio
        << ", total " << t.total << '\n';
  }
}

struct PlotRequest {
  std::vector<std::string> results;
  std::string out_prefix = "tradeoff";
};

/// Writes <prefix>.svg and <prefix>.csv with one point per result record.
inline std::vector<PlotPoint> cmd_plot(const PlotRequest& req) {
  if (req.results.empty()) throw ResultError("plot needs at least one result file");
  std::vector<ResultRecord> records;
  std::vector<PlotPoint> points;
  for (const auto& path : req.results) {
    records.push_back(load_result(path));
    const fs::path p(path);
    std::string label = p.parent_path().filename().string();
    if (label.empty() || label == ".") label = p.stem().string();
    points.push_back(plot_point(records.back(), label + " (" + to_string(records.back().variant) + ")"));
  }
  const auto ref = vanilla_reference(records);
  const fs::path prefix(req.out_prefix);
  if (prefix.has_parent_path()) detail::ensure_dir(prefix.parent_path());
  std::ofstream svg(req.out_prefix + ".svg"), csv(req.out_prefix + ".csv");
  if (!svg || !csv) throw ResultError("cannot write plot files with prefix " + req.out_prefix);
  write_plot_svg(svg, points, ref);
  write_plot_csv(csv, points);
  return points;
}

/// Writes the synthetic dataset as CSV and its schema as JSON.
inline void cmd_synth(const SyntheticOptions& opt, const std::string& csv_path, const std::string& schema_path) {
  std::ofstream csv(csv_path);
  if (!csv) throw DataError("cannot write " + csv_path);
  write_csv(csv, synthetic_table(opt), synthetic_schema());
  if (!schema_path.empty()) {
    std::ofstream js(schema_path);
    if (!js) throw DataError("cannot write " + schema_path);
    js << synthetic_schema().to_json().dump(2) << '\n';
  }
}

}  // namespace infofair
