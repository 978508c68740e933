#pragma once

// The four trainable parts: feature extractor (producing the learning
// outcome), target predictor, sensitive-feature decoder with Gumbel-Softmax
// sampling, and the linear density-ratio estimator.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "infofair/tensor.hpp"

namespace infofair {

struct ExtractorConfig {
  std::size_t input_dim = 1;
  std::vector<std::size_t> hidden{32};
  std::size_t embed_dim = 32;

  void validate() const {
    if (input_dim < 1 || embed_dim < 1) throw std::invalid_argument("extractor dims must be >= 1");
    for (auto h : hidden)
      if (h < 1) throw std::invalid_argument("hidden layer sizes must be >= 1");
  }
};

struct ModelDims {
  ExtractorConfig extractor;
  std::size_t num_classes = 2;
  std::size_t group_card = 2;
};

struct Linear {
  Tensor weight;  // in x out
  Tensor bias;    // out
};

struct ModelBundle {
  ModelDims dims;
  std::vector<Linear> extractor;
  Linear target;
  Linear decoder;
  Tensor w1;  // embed_dim
  Tensor w2;  // group_card

  /// Extractor and target-head parameters.
  std::vector<Tensor> theta() const {
    std::vector<Tensor> p;
    for (const auto& l : extractor) {
      p.push_back(l.weight);
      p.push_back(l.bias);
    }
    p.push_back(target.weight);
    p.push_back(target.bias);
    return p;
  }
  std::vector<Tensor> decoder_params() const { return {decoder.weight, decoder.bias}; }
  std::vector<Tensor> estimator_params() const { return {w1, w2}; }

  /// Every parameter in declaration order (checkpoint order).
  std::vector<Tensor> all_params() const {
    auto p = theta();
    for (const auto& t : decoder_params()) p.push_back(t);
    for (const auto& t : estimator_params()) p.push_back(t);
    return p;
  }

  /// Deep copy; the clone shares no storage with this bundle.
  ModelBundle clone() const {
    ModelBundle b = *this;
    auto copy = [](Tensor& t) {
      const bool rg = t.requires_grad();
      t = t.detach();
      t.set_requires_grad(rg);
    };
    for (auto& l : b.extractor) {
      copy(l.weight);
      copy(l.bias);
    }
    copy(b.target.weight);
    copy(b.target.bias);
    copy(b.decoder.weight);
    copy(b.decoder.bias);
    copy(b.w1);
    copy(b.w2);
    return b;
  }
};

namespace detail {

inline Linear glorot_linear(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> u(-limit, limit);
  std::vector<double> w(in * out);
  for (auto& v : w) v = u(rng);
  return {Tensor::from({in, out}, std::move(w), true), Tensor::zeros({out}, true)};
}

}  // namespace detail

/// Glorot-uniform weights, zero biases, zero density-ratio weights.
inline ModelBundle init_model(const ModelDims& dims, std::uint64_t seed) {
  dims.extractor.validate();
  if (dims.num_classes < 1 || dims.group_card < 1) {
    throw std::invalid_argument("class and group counts must be >= 1");
  }
  std::mt19937_64 rng(seed);
  ModelBundle b;
  b.dims = dims;
  std::size_t in = dims.extractor.input_dim;
  for (auto h : dims.extractor.hidden) {
    b.extractor.push_back(detail::glorot_linear(in, h, rng));
    in = h;
  }
  b.extractor.push_back(detail::glorot_linear(in, dims.extractor.embed_dim, rng));
  b.target = detail::glorot_linear(dims.extractor.embed_dim, dims.num_classes, rng);
  b.decoder = detail::glorot_linear(dims.extractor.embed_dim, dims.group_card, rng);
  b.w1 = Tensor::zeros({dims.extractor.embed_dim}, true);
  b.w2 = Tensor::zeros({dims.group_card}, true);
  return b;
}

/// MLP: affine + ReLU per hidden layer, then a final affine map.
inline Tensor extract(Tape& tape, const Tensor& x, const ModelBundle& b) {
  if (x.rank() != 2 || x.cols() != b.dims.extractor.input_dim) {
    throw DimensionError("extract: input " + to_string(x.shape()) + " but model expects " +
                         std::to_string(b.dims.extractor.input_dim) + " features");
  }
  Tensor h = x;
  for (std::size_t i = 0; i < b.extractor.size(); ++i) {
    h = affine(tape, h, b.extractor[i].weight, b.extractor[i].bias);
    if (i + 1 < b.extractor.size()) h = relu(tape, h);
  }
  return h;
}

/// Class log-probabilities from the learning outcome.
inline Tensor predict_target(Tape& tape, const Tensor& outcome, const ModelBundle& b) {
  return log_softmax(tape, affine(tape, outcome, b.target.weight, b.target.bias));
}

struct SensitivePrediction {
  Tensor log_probs;  // m x g, the log of o_s
  Tensor log_q;      // m, log q(group_i | outcome_i)
};

/// Decoder log-probabilities over the joint groups, plus their values at the
/// given ground-truth groups.
inline SensitivePrediction predict_sensitive(Tape& tape, const Tensor& outcome, const ModelBundle& b,
                                             std::span<const int> groups) {
  Tensor lp = log_softmax(tape, affine(tape, outcome, b.decoder.weight, b.decoder.bias));
  Tensor lq = pick(tape, lp, groups);
  return {lp, lq};
}

struct GumbelConfig {
  double temperature = 1.0;
  std::uint64_t seed = 0;
};

/// Relaxed one-hot samples softmax((log o + g) / tau) with g ~ Gumbel(0, 1).
/// Deterministic in (seed, number of draws so far).
class GumbelSampler {
 public:
  explicit GumbelSampler(std::uint64_t seed) : rng_(seed) {}

  std::vector<double> noise(std::size_t count) {
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    std::vector<double> g(count);
    for (auto& v : g) {
      double u = 0.0;
      do {
        u = uniform(rng_);
      } while (u <= 0.0);
      v = -std::log(-std::log(u));
    }
    return g;
  }

  Tensor sample(Tape& tape, const Tensor& log_probs, double temperature) {
    if (!(temperature > 0.0)) throw std::invalid_argument("Gumbel temperature must be > 0");
    if (log_probs.rank() != 2) throw DimensionError("gumbel_sample expects an m x g matrix");
    const Tensor g = Tensor::from(log_probs.shape(), noise(log_probs.size()));
    const Tensor z = scale(tape, add(tape, log_probs, g), 1.0 / temperature);
    return exp(tape, log_softmax(tape, z));
  }

 private:
  std::mt19937_64 rng_;
};

/// Per-row log density-ratio score w1 . outcome + w2 . s.
inline Tensor density_ratio(Tape& tape, const Tensor& outcome, const Tensor& s, const ModelBundle& b) {
  return add(tape, matvec(tape, outcome, b.w1), matvec(tape, s, b.w2));
}

inline Tensor one_hot(std::span<const int> labels, std::size_t classes) {
  Tensor t = Tensor::zeros({labels.size(), classes});
  auto v = t.mutable_values();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) {
      throw std::out_of_range("one_hot: label outside class range");
    }
    v[i * classes + static_cast<std::size_t>(labels[i])] = 1.0;
  }
  return t;
}

}  // namespace infofair
