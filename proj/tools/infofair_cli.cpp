// infofair command-line driver.

#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "infofair/infofair.hpp"

namespace {

using namespace infofair;

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = detail::trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

/// "0,1,2", "0-4" or a mix of both.
std::vector<std::uint64_t> parse_seeds(const std::string& s) {
  std::vector<std::uint64_t> out;
  for (const auto& part : split_list(s)) {
    const auto dash = part.find('-');
    try {
      if (dash == std::string::npos) {
        out.push_back(std::stoull(part));
      } else {
        const auto lo = std::stoull(part.substr(0, dash)), hi = std::stoull(part.substr(dash + 1));
        if (hi < lo) throw ConfigError("bad seed range '" + part + "'");
        for (auto k = lo; k <= hi; ++k) out.push_back(k);
      }
    } catch (const std::logic_error&) {
      throw ConfigError("bad seed list '" + s + "'");
    }
  }
  if (out.empty()) throw ConfigError("empty seed list");
  return out;
}

struct TrainFlags {
  std::string config;
  std::string seeds;
  std::optional<double> alpha;
  std::string variant;
  std::string sensitive;
  std::string out;
  unsigned jobs = 1;
  bool quiet = false;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
  cmd->add_option("--config", f.config, "run configuration (JSON)")->required();
  cmd->add_option("--seeds", f.seeds, "seed list, e.g. 0-4 or 0,2,3");
  cmd->add_option("--alpha", f.alpha, "fairness weight");
  cmd->add_option("--variant", f.variant, "tsd, ts, td, vanilla or eo");
  cmd->add_option("--sensitive", f.sensitive, "comma-separated sensitive attributes to debias");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--jobs", f.jobs, "seeds trained in parallel")->check(CLI::PositiveNumber);
  cmd->add_flag("--quiet", f.quiet, "no progress output");
}

RunConfig resolve(const TrainFlags& f) {
  RunConfig cfg = load_run_config(f.config);
  if (!f.seeds.empty()) cfg.train.seeds = parse_seeds(f.seeds);
  if (f.alpha) cfg.train.alpha = *f.alpha;
  if (!f.variant.empty()) {
    try {
      cfg.train.variant = parse_variant(f.variant);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  if (!f.sensitive.empty()) cfg.sensitive = split_list(f.sensitive);
  if (!f.out.empty()) cfg.out_dir = f.out;
  return cfg;
}

void print_summary(const ResultRecord& r, const std::string& path) {
  std::cout.precision(4);
  std::cout << to_string(r.variant) << " alpha=" << r.alpha << " seeds=" << r.runs.size()
            << " micro_f1=" << r.aggregate.micro_f1 << " macro_f1=" << r.aggregate.macro_f1
            << " imparity=" << r.aggregate.imparity;
  if (r.aggregate.reduction) std::cout << " reduction=" << *r.aggregate.reduction;
  if (r.vanilla) std::cout << " vanilla_imparity=" << r.vanilla->imparity;
  std::cout << " -> " << path << '\n';
}

std::string one_line(std::string s) {
  for (auto& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fairness-regularized classification with a mutual-information penalty"};
  app.require_subcommand(1);

  TrainFlags train_flags, ablate_flags;
  auto* train = app.add_subcommand("train", "train a variant (plus a vanilla reference) for each seed");
  add_train_flags(train, train_flags);
  auto* ablate = app.add_subcommand("ablate", "train TSD, TS and TD on identical splits and seeds");
  add_train_flags(ablate, ablate_flags);

  std::string ckpt, eval_data, eval_schema, eval_out;
  std::vector<std::string> eval_sensitive;
  auto* evaluate = app.add_subcommand("evaluate", "score a checkpoint, optionally on attribute subsets");
  evaluate->add_option("--checkpoint", ckpt, "model checkpoint")->required();
  evaluate->add_option("--data", eval_data, "dataset CSV (defaults to the training data)");
  evaluate->add_option("--schema", eval_schema, "schema for --data");
  evaluate->add_option("--sensitive", eval_sensitive,
                       "attribute partition, comma-separated; repeat for several partitions");
  evaluate->add_option("--out", eval_out, "write the metrics as JSON to this file");

  OracleRequest oracle_req;
  auto* oracle = app.add_subcommand("oracle", "run the exact mutual-information checks");
  oracle->add_option("--seed", oracle_req.seed, "suite seed");
  oracle->add_option("--trials", oracle_req.trials, "cases per suite")->check(CLI::PositiveNumber);
  oracle->add_option("--joint", oracle_req.joint_path, "joint table file to analyse");
  oracle->add_option("--q", oracle_req.q_path, "conditional q(b|a) table for --joint");

  PlotRequest plot_req;
  auto* plot = app.add_subcommand("plot", "trade-off scatter (SVG) and CSV from result files");
  plot->add_option("results", plot_req.results, "result.json files")->required();
  plot->add_option("--out", plot_req.out_prefix, "output prefix (writes PREFIX.svg and PREFIX.csv)");

  SyntheticOptions synth_opt;
  std::string synth_csv = "synthetic.csv", synth_schema;
  auto* synth = app.add_subcommand("synth", "write the synthetic biased dataset as CSV");
  synth->add_option("--out", synth_csv, "CSV path");
  synth->add_option("--schema-out", synth_schema, "also write the schema JSON here");
  synth->add_option("--n", synth_opt.n, "rows");
  synth->add_option("--seed", synth_opt.seed, "generator seed");
  synth->add_option("--group-bias", synth_opt.group_bias, "strength of the label-group correlation");
  synth->add_option("--signal", synth_opt.signal, "strength of the group-independent features");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "infofair: error: " << one_line(e.what()) << '\n';
    return e.get_exit_code() != 0 ? e.get_exit_code() : 2;
  }

  try {
    if (*train || *ablate) {
      const TrainFlags& f = *train ? train_flags : ablate_flags;
      const RunConfig cfg = resolve(f);
      CommandOptions opt{f.jobs, f.quiet ? nullptr : &std::cerr};
      if (*train) {
        print_summary(cmd_train(cfg, opt), cfg.out_dir + "/result.json");
      } else {
        for (const auto& r : cmd_ablate(cfg, opt)) {
          print_summary(r, cfg.out_dir + "/" + to_string(r.variant) + "/result.json");
        }
      }
    } else if (*evaluate) {
      EvaluateRequest req;
      req.checkpoint = ckpt;
      if (!eval_data.empty() || !eval_schema.empty()) {
        if (eval_data.empty() || eval_schema.empty()) throw ConfigError("--data and --schema go together");
        req.source = DataSource{eval_data, eval_schema, std::nullopt};
      }
      for (const auto& p : eval_sensitive) req.partitions.push_back(split_list(p));
      const auto results = cmd_evaluate(req, {1, &std::cerr});
      nlohmann::json out = nlohmann::json::array();
      for (const auto& r : results) out.push_back(to_json(r));
      if (!eval_out.empty()) {
        std::ofstream f(eval_out);
        if (!f) throw ConfigError("cannot write " + eval_out);
        f << out.dump(2) << '\n';
      }
      std::cout.precision(17);
      for (const auto& r : results) {
        std::string names;
        for (const auto& n : r.sensitive) names += (names.empty() ? "" : ",") + n;
        std::cout << "sensitive=" << names << " micro_f1=" << r.metrics.micro_f1
                  << " macro_f1=" << r.metrics.macro_f1 << " imparity=" << r.metrics.imparity << '\n';
      }
    } else if (*oracle) {
      const auto rep = cmd_oracle(oracle_req);
      print_oracle(std::cout, rep);
      if (!rep.passed) {
        std::cerr << "infofair: error: oracle residual above tolerance\n";
        return 1;
      }
    } else if (*plot) {
      const auto pts = cmd_plot(plot_req);
      std::cout << pts.size() << " points -> " << plot_req.out_prefix << ".svg, " << plot_req.out_prefix
                << ".csv\n";
    } else if (*synth) {
      cmd_synth(synth_opt, synth_csv, synth_schema);
      std::cout << synth_opt.n << " rows -> " << synth_csv << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "infofair: error: " << one_line(e.what()) << '\n';
    return 1;
  }
  return 0;
}
