#pragma once

// The fairness-regularized objective J = T + S + D, its ablations, the
// equal-opportunity variant, and the alternating training loop.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "infofair/adam.hpp"
#include "infofair/data.hpp"
#include "infofair/metrics.hpp"
#include "infofair/model.hpp"
#include "infofair/tensor.hpp"

namespace infofair {

enum class Variant { TSD, TS, TD, VANILLA, EO_TSD };

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::TSD: return "tsd";
    case Variant::TS: return "ts";
    case Variant::TD: return "td";
    case Variant::VANILLA: return "vanilla";
    case Variant::EO_TSD: return "eo";
  }
  return "?";
}

inline Variant parse_variant(const std::string& s) {
  std::string k = s;
  std::transform(k.begin(), k.end(), k.begin(), [](unsigned char c) { return std::tolower(c); });
  if (k == "tsd") return Variant::TSD;
  if (k == "ts") return Variant::TS;
  if (k == "td") return Variant::TD;
  if (k == "vanilla") return Variant::VANILLA;
  if (k == "eo" || k == "eo_tsd") return Variant::EO_TSD;
  throw std::invalid_argument("unknown objective variant '" + s + "'");
}

inline bool uses_S(Variant v) { return v == Variant::TSD || v == Variant::TS || v == Variant::EO_TSD; }
inline bool uses_D(Variant v) { return v == Variant::TSD || v == Variant::TD || v == Variant::EO_TSD; }

struct TrainConfig {
  double alpha = 0.1;
  Variant variant = Variant::TSD;
  int epochs = 100;
  int patience = 5;
  double learning_rate = 1e-4;
  double weight_decay = 0.01;
  std::size_t batch_size = 128;
  double tau0 = 1.0;
  int anneal_period = 50;
  double anneal_factor = 2.0;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::vector<std::size_t> hidden{32};
  std::size_t embed_dim = 32;

  void validate(int num_classes = 2) const {
    if (!(alpha >= 0.0)) throw std::invalid_argument("alpha must be >= 0");
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (patience < 1) throw std::invalid_argument("patience must be >= 1");
    if (!(tau0 > 0.0)) throw std::invalid_argument("initial temperature must be > 0");
    if (anneal_period < 1 || !(anneal_factor > 0.0)) throw std::invalid_argument("invalid annealing schedule");
    if (!(learning_rate > 0.0) || weight_decay < 0.0) throw std::invalid_argument("invalid optimizer settings");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (seeds.empty()) throw std::invalid_argument("at least one seed required");
    if (variant == Variant::EO_TSD && num_classes != 2) {
      throw std::invalid_argument("equal-opportunity objective requires a binary label");
    }
  }
};

/// tau0 / factor^floor(epoch / period)
inline double anneal(int epoch, const TrainConfig& cfg) {
  if (epoch < 0) throw std::invalid_argument("epoch must be >= 0");
  return cfg.tau0 / std::pow(cfg.anneal_factor, std::floor(epoch / cfg.anneal_period));
}

struct Batch {
  Tensor x;
  std::vector<int> y;
  std::vector<int> group;
  Tensor s_real;  // one-hot of group
};

inline Batch make_batch(const EncodedDataset& ds, std::span<const std::size_t> rows) {
  Batch b;
  std::vector<double> x(rows.size() * ds.d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(ds.X.begin() + static_cast<std::ptrdiff_t>(rows[i] * ds.d), ds.d,
                x.begin() + static_cast<std::ptrdiff_t>(i * ds.d));
    b.y.push_back(ds.y[rows[i]]);
    b.group.push_back(ds.group[rows[i]]);
  }
  b.x = Tensor::from({rows.size(), ds.d}, std::move(x));
  b.s_real = one_hot(b.group, static_cast<std::size_t>(ds.group_card));
  return b;
}

inline Batch full_batch(const EncodedDataset& ds) {
  std::vector<std::size_t> rows(ds.n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return make_batch(ds, rows);
}

// ---------------------------------------------------------------------------
// Loss terms on a tape

/// Mean negative log-likelihood of the true labels.
inline Tensor loss_T(Tape& tape, const Tensor& outcome, const ModelBundle& m, std::span<const int> y) {
  return nll_loss(tape, predict_target(tape, outcome, m), y);
}

/// alpha * E[log q(s | outcome)] at the true groups.
inline Tensor loss_S(Tape& tape, const Tensor& log_q, double alpha) {
  return scale(tape, mean(tape, log_q), alpha);
}

/// alpha * mean of the density-ratio score over the union of real pairs and
/// an equal number of generated pairs.
inline Tensor loss_D(Tape& tape, const Tensor& outcome, const Tensor& s_real, const Tensor& s_fake,
                     const ModelBundle& m, double alpha) {
  const Tensor real = mean(tape, density_ratio(tape, outcome, s_real, m));
  const Tensor fake = mean(tape, density_ratio(tape, outcome, s_fake, m));
  return scale(tape, add(tape, real, fake), 0.5 * alpha);
}

/// Logistic discrimination loss: real pairs labelled +1, generated pairs -1.
inline Tensor estimator_loss(Tape& tape, const Tensor& outcome, const Tensor& s_real,
                             const Tensor& s_fake, const ModelBundle& m) {
  const std::vector<int> pos(outcome.rows(), 1), neg(outcome.rows(), -1);
  const Tensor real = logistic_loss(tape, density_ratio(tape, outcome, s_real, m), pos);
  const Tensor fake = logistic_loss(tape, density_ratio(tape, outcome, s_fake, m), neg);
  return scale(tape, add(tape, real, fake), 0.5);
}

/// Mean negative log q at the true groups; trains the decoder.
inline Tensor decoder_loss(Tape& tape, const Tensor& outcome, const ModelBundle& m,
                           std::span<const int> groups) {
  return scale(tape, mean(tape, predict_sensitive(tape, outcome, m, groups).log_q), -1.0);
}

using WarningSink = std::function<void(const std::string&)>;

inline void stderr_warning(const std::string& msg) { std::cerr << "warning: " << msg << '\n'; }

struct ObjectiveTerms {
  Tensor T;
  std::optional<Tensor> S;
  std::optional<Tensor> D;
  Tensor J;
};

inline std::vector<std::size_t> positive_rows(std::span<const int> y) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < y.size(); ++i)
    if (y[i] == 1) rows.push_back(i);
  return rows;
}

/// S and D restricted to rows with y = 1. A batch without positives
/// contributes zero to both and triggers a warning.
inline std::pair<Tensor, Tensor> eo_losses(Tape& tape, const Tensor& outcome, const Batch& batch,
                                           const ModelBundle& m, GumbelSampler& sampler, double tau,
                                           double alpha, const WarningSink& warn = stderr_warning) {
  const auto rows = positive_rows(batch.y);
  if (rows.empty()) {
    if (warn) warn("batch has no positive samples; equal-opportunity terms set to 0");
    return {Tensor::scalar(0.0), Tensor::scalar(0.0)};
  }
  std::vector<int> groups;
  for (auto r : rows) groups.push_back(batch.group[r]);
  const Tensor sub = gather_rows(tape, outcome, rows);
  const Tensor s_real = gather_rows(tape, batch.s_real, rows);
  const auto pred = predict_sensitive(tape, sub, m, groups);
  const Tensor s_fake = sampler.sample(tape, pred.log_probs, tau);
  return {loss_S(tape, pred.log_q, alpha), loss_D(tape, sub, s_real, s_fake, m, alpha)};
}

/// Builds the variant's objective for one batch. Gumbel noise is drawn only
/// when the variant needs generated pairs.
inline ObjectiveTerms build_objective(Tape& tape, const Batch& batch, const ModelBundle& m,
                                      Variant variant, double alpha, GumbelSampler& sampler,
                                      double tau, const WarningSink& warn = stderr_warning) {
  ObjectiveTerms o;
  const Tensor outcome = extract(tape, batch.x, m);
  o.T = loss_T(tape, outcome, m, batch.y);
  o.J = o.T;
  if (variant == Variant::VANILLA) return o;

  if (variant == Variant::EO_TSD) {
    auto [s, d] = eo_losses(tape, outcome, batch, m, sampler, tau, alpha, warn);
    o.S = s;
    o.D = d;
  } else {
    const auto pred = predict_sensitive(tape, outcome, m, batch.group);
    if (uses_S(variant)) o.S = loss_S(tape, pred.log_q, alpha);
    if (uses_D(variant)) {
      const Tensor s_fake = sampler.sample(tape, pred.log_probs, tau);
      o.D = loss_D(tape, outcome, batch.s_real, s_fake, m, alpha);
    }
  }
  if (o.S) o.J = add(tape, o.J, *o.S);
  if (o.D) o.J = add(tape, o.J, *o.D);
  return o;
}

// ---------------------------------------------------------------------------
// Training

struct EpochReport {
  int epoch = 0;
  double T = 0.0;
  std::optional<double> S;
  std::optional<double> D;
  double decoder_loss = 0.0;
  double estimator_loss = 0.0;
  double tau = 1.0;
  double val_imparity = 0.0;
  double val_micro_f1 = 0.0;
};

inline ModelDims dims_for(const EncodedDataset& ds, const TrainConfig& cfg) {
  ModelDims d;
  d.extractor.input_dim = ds.d;
  d.extractor.hidden = cfg.hidden;
  d.extractor.embed_dim = cfg.embed_dim;
  d.num_classes = static_cast<std::size_t>(ds.num_classes);
  d.group_card = static_cast<std::size_t>(ds.group_card);
  return d;
}

/// Owns one run's parameters, optimizer states, and noise stream. Each batch
/// makes three updates in order: decoder on decoder_loss, density-ratio
/// weights on estimator_loss, then extractor and target head on J with the
/// other groups frozen.
class Trainer {
 public:
  Trainer(const EncodedDataset& train, TrainConfig cfg, std::uint64_t seed,
          WarningSink warn = stderr_warning)
      : train_(&train),
        cfg_(std::move(cfg)),
        seed_(seed),
        bundle_(init_model(dims_for(train, cfg_), seed)),
        sampler_(seed ^ 0x9e3779b97f4a7c15ULL),
        warn_(std::move(warn)) {
    cfg_.validate(train.num_classes);
    const AdamOptions opt{cfg_.learning_rate, 0.9, 0.999, 1e-8, cfg_.weight_decay};
    theta_ = bundle_.theta();
    decoder_ = bundle_.decoder_params();
    estimator_ = bundle_.estimator_params();
    theta_state_ = AdamState::for_params(theta_, opt);
    decoder_state_ = AdamState::for_params(decoder_, opt);
    estimator_state_ = AdamState::for_params(estimator_, opt);
  }

  Trainer(const Trainer&) = delete;
  Trainer& operator=(const Trainer&) = delete;

  const ModelBundle& bundle() const { return bundle_; }
  const TrainConfig& config() const { return cfg_; }

  /// One pass over the training split. Non-finite values abort with the epoch
  /// and batch position in the message.
  EpochReport train_epoch(int epoch) {
    EpochReport rep;
    rep.epoch = epoch;
    rep.tau = anneal(epoch, cfg_);
    const auto order = batches(train_->n, cfg_.batch_size, seed_, static_cast<std::uint64_t>(epoch));
    double s_sum = 0.0, d_sum = 0.0;
    bool has_s = false, has_d = false;
    std::size_t b = 0;
    try {
      for (; b < order.size(); ++b) {
        const Batch batch = make_batch(*train_, order[b]);
        const auto w = static_cast<double>(order[b].size());
        const auto step = step_batch(batch, rep.tau);
        rep.decoder_loss += step.decoder * w;
        rep.estimator_loss += step.estimator * w;
        rep.T += step.T * w;
        if (step.S) {
          has_s = true;
          s_sum += *step.S * w;
        }
        if (step.D) {
          has_d = true;
          d_sum += *step.D * w;
        }
      }
    } catch (const NumericError& e) {
      std::ostringstream os;
      os << "training diverged at epoch " << epoch << ", batch " << b << " (seed " << seed_
         << ", variant " << to_string(cfg_.variant) << "): " << e.what();
      throw NumericError(os.str());
    }
    const auto n = static_cast<double>(train_->n);
    rep.T /= n;
    rep.decoder_loss /= n;
    rep.estimator_loss /= n;
    if (has_s) rep.S = s_sum / n;
    if (has_d) rep.D = d_sum / n;
    return rep;
  }

  struct StepLosses {
    double decoder = 0.0;
    double estimator = 0.0;
    double T = 0.0;
    std::optional<double> S;
    std::optional<double> D;
  };

  /// Learning outcome for the batch, detached from the parameters.
  Tensor outcome(const Batch& batch) const {
    Tape tape;
    return extract(tape, batch.x, bundle_).detach();
  }

  /// (a) Decoder step on decoder_loss; returns the pre-step loss.
  double decoder_step(const Tensor& outcome, const Batch& batch) {
    Tape tape;
    const Tensor loss = decoder_loss(tape, outcome, bundle_, batch.group);
    tape.backward(loss);
    adam_step(decoder_, decoder_state_);
    return loss.item();
  }

  /// (b) Density-ratio step on estimator_loss, with generated pairs drawn
  /// from the current decoder.
  double estimator_step(const Tensor& outcome, const Batch& batch, double tau) {
    Tape tape;
    const Tensor s_fake =
        sampler_.sample(tape, predict_sensitive(tape, outcome, bundle_, batch.group).log_probs, tau).detach();
    const Tensor loss = estimator_loss(tape, outcome, batch.s_real, s_fake, bundle_);
    tape.backward(loss);
    adam_step(estimator_, estimator_state_);
    return loss.item();
  }

  /// (c) Extractor and target-head step on the variant's objective.
  ObjectiveTerms theta_step(const Batch& batch, double tau) {
    Tape tape;
    auto terms = build_objective(tape, batch, bundle_, cfg_.variant, cfg_.alpha, sampler_, tau, warn_);
    tape.backward(terms.J);
    adam_step(theta_, theta_state_);
    return terms;
  }

  StepLosses step_batch(const Batch& batch, double tau) {
    StepLosses out;
    const Tensor y = outcome(batch);
    out.decoder = decoder_step(y, batch);
    out.estimator = estimator_step(y, batch, tau);
    const auto terms = theta_step(batch, tau);
    out.T = terms.T.item();
    if (terms.S) out.S = terms.S->item();
    if (terms.D) out.D = terms.D->item();
    return out;
  }

 private:
  const EncodedDataset* train_;
  TrainConfig cfg_;
  std::uint64_t seed_;
  ModelBundle bundle_;
  GumbelSampler sampler_;
  WarningSink warn_;
  std::vector<Tensor> theta_, decoder_, estimator_;
  AdamState theta_state_, decoder_state_, estimator_state_;
};

/// Argmax of the target head (lowest index wins ties).
inline std::vector<int> predict(const ModelBundle& m, const EncodedDataset& ds) {
  const Batch b = full_batch(ds);
  Tape tape;
  const Tensor lp = predict_target(tape, extract(tape, b.x, m), m);
  std::vector<int> out(ds.n);
  const std::size_t c = lp.cols();
  for (std::size_t i = 0; i < ds.n; ++i) {
    const auto row = lp.values().subspan(i * c, c);
    out[i] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

/// Metrics on the dataset's active group partition.
inline MetricsReport evaluate_model(const ModelBundle& m, const EncodedDataset& ds) {
  const auto pred = predict(m, ds);
  return evaluate_predictions(pred, ds.y, ds.group, ds.num_classes, ds.group_card);
}

/// Tracks a monitored metric; signals a stop once `patience` consecutive
/// updates fail to strictly improve on the best value.
class EarlyStopping {
 public:
  EarlyStopping(int patience, bool minimize) : patience_(patience), minimize_(minimize) {}

  /// Returns true when training should stop.
  bool update(double value) {
    improved_ = !best_ || (minimize_ ? value < *best_ : value > *best_);
    if (improved_) {
      best_ = value;
      wait_ = 0;
    } else {
      ++wait_;
    }
    return wait_ >= patience_;
  }

  bool improved() const { return improved_; }
  std::optional<double> best() const { return best_; }

 private:
  int patience_;
  bool minimize_;
  std::optional<double> best_;
  int wait_ = 0;
  bool improved_ = false;
};

struct FitResult {
  ModelBundle best;
  int best_epoch = 0;
  std::vector<EpochReport> log;
};

/// Selection metric for a variant on the validation split: imparity (EO
/// disparity for the equal-opportunity variant), minimized; VANILLA instead
/// maximizes micro F1.
inline double selection_metric(const TrainConfig& cfg, const EpochReport& r) {
  return cfg.variant == Variant::VANILLA ? r.val_micro_f1 : r.val_imparity;
}

using EpochCallback = std::function<void(const EpochReport&)>;

/// Trains for up to cfg.epochs epochs with early stopping and returns the
/// checkpoint that scored best on the validation split.
inline FitResult fit(const DataSplits& splits, const TrainConfig& cfg, std::uint64_t seed,
                     const EpochCallback& on_epoch = {}, WarningSink warn = stderr_warning) {
  Trainer trainer(splits.train, cfg, seed, std::move(warn));
  const bool vanilla = cfg.variant == Variant::VANILLA;
  EarlyStopping stopper(cfg.patience, !vanilla);
  FitResult result;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    EpochReport rep = trainer.train_epoch(epoch);
    const auto pred = predict(trainer.bundle(), splits.validation);
    rep.val_micro_f1 = micro_macro_f1(pred, splits.validation.y, splits.validation.num_classes).micro;
    rep.val_imparity = cfg.variant == Variant::EO_TSD
                           ? eo_disparity(pred, splits.validation.group, splits.validation.y,
                                          splits.validation.group_card)
                           : imparity(pred, splits.validation.group, splits.validation.num_classes,
                                      splits.validation.group_card);
    result.log.push_back(rep);
    if (on_epoch) on_epoch(rep);
    const bool stop = stopper.update(selection_metric(cfg, rep));
    if (stopper.improved()) {
      result.best = trainer.bundle().clone();
      result.best_epoch = epoch;
    }
    if (stop) break;
  }
  return result;
}

}  // namespace infofair
