#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "infofair/infofair.hpp"

namespace testing_support {

using namespace infofair;

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, bool grad = true, double lo = -2.0,
                            double hi = 2.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(element_count(shape));
  for (auto& x : v) x = u(rng);
  return Tensor::from(std::move(shape), std::move(v), grad);
}

struct GradCheck {
  double max_rel = 0.0;
  std::size_t checked = 0;
};

/// Compares backward() against central differences (h = 1e-5) for every
/// element of every tensor in `params`. The relative error of one element is
/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-6).
inline GradCheck check_gradients(const std::function<Tensor(Tape&)>& loss_fn, std::vector<Tensor> params,
                                 double h = 1e-5) {
  for (auto& p : params) p.clear_grad();
  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    const Tensor loss = loss_fn(tape);
    tape.backward(loss);
    for (auto& p : params) {
      if (p.has_grad()) {
        analytic.emplace_back(p.grad().begin(), p.grad().end());
      } else {
        analytic.emplace_back(p.size(), 0.0);
      }
    }
  }
  auto value = [&] {
    Tape tape;
    return loss_fn(tape).item();
  };
  GradCheck out;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto v = params[k].mutable_values();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double orig = v[i];
      v[i] = orig + h;
      const double up = value();
      v[i] = orig - h;
      const double down = value();
      v[i] = orig;
      const double numeric = (up - down) / (2 * h);
      const double a = analytic[k][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
      out.max_rel = std::max(out.max_rel, std::abs(a - numeric) / denom);
      ++out.checked;
    }
  }
  return out;
}

/// Two Gaussian blobs (means -2 and +2 in both coordinates) labelled by blob,
/// with an unrelated binary sensitive attribute.
inline EncodedDataset two_gaussians(std::size_t n, std::uint64_t seed) {
  DatasetSchema schema;
  schema.features = {{"a", ColumnKind::continuous, {}}, {"b", ColumnKind::continuous, {}}};
  schema.label = "y";
  schema.label_values = {"0", "1"};
  schema.sensitive = {{"s", {"u", "v"}}};
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  RawTable t;
  t.rows = n;
  t.features.resize(2);
  t.sensitive.resize(1);
  for (std::size_t i = 0; i < n; ++i) {
    const int y = coin(rng) ? 1 : 0;
    const double mu = y ? 2.0 : -2.0;
    t.features[0].push_back(mu + noise(rng));
    t.features[1].push_back(mu + noise(rng));
    t.label.push_back(y);
    t.sensitive[0].push_back(coin(rng) ? 1 : 0);
  }
  return encode(t, schema, {false, {}});
}

inline EncodedDataset small_synthetic(std::size_t n = 600, std::uint64_t seed = 7) {
  SyntheticOptions o;
  o.n = n;
  o.seed = seed;
  return encode(synthetic_table(o), synthetic_schema());
}

inline Batch random_batch(const EncodedDataset& ds, std::size_t m, std::uint64_t seed) {
  auto order = batches(ds.n, m, seed, 0);
  return make_batch(ds, order.front());
}

}  // namespace testing_support
