#pragma once

// Exact mutual information on discrete joint tables, the three-term
// variational decomposition, and the randomized suites that certify them.
// All logarithms are natural (nats).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace infofair {

class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Probability table P(a, b), a in [0, A), b in [0, B), row-major.
struct DiscreteJoint {
  std::size_t A = 1;
  std::size_t B = 1;
  std::vector<double> p;

  double operator()(std::size_t a, std::size_t b) const { return p[a * B + b]; }

  void validate() const {
    if (A < 1 || B < 1) throw PreconditionError("joint: both dimensions must be >= 1");
    if (p.size() != A * B) throw PreconditionError("joint: table size does not match dimensions");
    double total = 0.0;
    for (double v : p) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw PreconditionError("joint: negative or non-finite entry");
      total += v;
    }
    if (std::abs(total - 1.0) > 1e-12) {
      std::ostringstream os;
      os.precision(17);
      os << "joint: total mass " << total << " is not 1";
      throw PreconditionError(os.str());
    }
  }

  std::vector<double> marginal_a() const {
    std::vector<double> m(A, 0.0);
    for (std::size_t a = 0; a < A; ++a)
      for (std::size_t b = 0; b < B; ++b) m[a] += (*this)(a, b);
    return m;
  }

  std::vector<double> marginal_b() const {
    std::vector<double> m(B, 0.0);
    for (std::size_t a = 0; a < A; ++a)
      for (std::size_t b = 0; b < B; ++b) m[b] += (*this)(a, b);
    return m;
  }

  DiscreteJoint transposed() const {
    DiscreteJoint t{B, A, std::vector<double>(p.size())};
    for (std::size_t a = 0; a < A; ++a)
      for (std::size_t b = 0; b < B; ++b) t.p[b * A + a] = (*this)(a, b);
    return t;
  }
};

/// Text form: "A B" on the first line, then A rows of B probabilities.
inline DiscreteJoint read_joint(std::istream& in) {
  DiscreteJoint j;
  if (!(in >> j.A >> j.B)) throw PreconditionError("joint: missing dimension header");
  j.p.resize(j.A * j.B);
  for (auto& v : j.p)
    if (!(in >> v)) throw PreconditionError("joint: expected " + std::to_string(j.A * j.B) + " entries");
  j.validate();
  return j;
}

inline void write_joint(std::ostream& out, const DiscreteJoint& j) {
  out.precision(17);
  out << j.A << ' ' << j.B << '\n';
  for (std::size_t a = 0; a < j.A; ++a) {
    for (std::size_t b = 0; b < j.B; ++b) out << (b ? " " : "") << j(a, b);
    out << '\n';
  }
}

/// Sum over a, b of P ln(P / (P_a P_b)), with 0 ln 0 = 0.
inline double brute_mi(const DiscreteJoint& j) {
  j.validate();
  const auto pa = j.marginal_a();
  const auto pb = j.marginal_b();
  double mi = 0.0;
  for (std::size_t a = 0; a < j.A; ++a)
    for (std::size_t b = 0; b < j.B; ++b) {
      const double pab = j(a, b);
      if (pab > 0.0) mi += pab * std::log(pab / (pa[a] * pb[b]));
    }
  return mi;
}

inline double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

struct VariationalTerms {
  double entropy_s = 0.0;   // H(s)
  double log_lik = 0.0;     // E[log q(s | y)]
  double log_ratio = 0.0;   // E[log p(y, s) / (p(y) q(s | y))]
  double total = 0.0;
};

/// Evaluates the three terms for a variational conditional q(b | a), given as
/// an A x B row-major table whose rows are probability vectors.
inline VariationalTerms variational_decomposition(const DiscreteJoint& j, std::span<const double> q) {
  j.validate();
  if (q.size() != j.A * j.B) throw PreconditionError("q: table size does not match the joint");
  for (std::size_t a = 0; a < j.A; ++a) {
    double row = 0.0;
    for (std::size_t b = 0; b < j.B; ++b) {
      const double v = q[a * j.B + b];
      if (!(v >= 0.0) || !std::isfinite(v)) throw PreconditionError("q: negative or non-finite entry");
      if (j(a, b) > 0.0 && v == 0.0) {
        throw PreconditionError("q(" + std::to_string(b) + "|" + std::to_string(a) +
                                ") is zero where the joint has mass");
      }
      row += v;
    }
    if (std::abs(row - 1.0) > 1e-12) {
      throw PreconditionError("q(.|" + std::to_string(a) + ") does not sum to 1");
    }
  }
  const auto pa = j.marginal_a();
  const auto pb = j.marginal_b();
  VariationalTerms t;
  t.entropy_s = entropy(pb);
  for (std::size_t a = 0; a < j.A; ++a)
    for (std::size_t b = 0; b < j.B; ++b) {
      const double pab = j(a, b);
      if (pab == 0.0) continue;
      const double qab = q[a * j.B + b];
      t.log_lik += pab * std::log(qab);
      t.log_ratio += pab * std::log(pab / (pa[a] * qab));
    }
  t.total = t.entropy_s + t.log_lik + t.log_ratio;
  return t;
}

/// Normalized count table of (prediction, group) pairs.
inline DiscreteJoint empirical_joint(std::span<const int> pred, std::span<const int> groups,
                                     std::size_t A, std::size_t B) {
  if (pred.size() != groups.size()) throw PreconditionError("empirical_joint: length mismatch");
  if (pred.empty()) throw PreconditionError("empirical_joint: no samples");
  DiscreteJoint j{A, B, std::vector<double>(A * B, 0.0)};
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] < 0 || static_cast<std::size_t>(pred[i]) >= A || groups[i] < 0 ||
        static_cast<std::size_t>(groups[i]) >= B) {
      throw PreconditionError("empirical_joint: value outside table");
    }
    j.p[static_cast<std::size_t>(pred[i]) * B + static_cast<std::size_t>(groups[i])] += 1.0;
  }
  for (auto& v : j.p) v /= static_cast<double>(pred.size());
  return j;
}

/// P(a, b1, b2) row-major with b2 fastest.
struct DiscreteJoint3 {
  std::size_t A = 1, B1 = 1, B2 = 1;
  std::vector<double> p;
  double operator()(std::size_t a, std::size_t b1, std::size_t b2) const {
    return p[(a * B1 + b1) * B2 + b2];
  }
};

struct SubsetMi {
  double first = 0.0;   // I(a; b1)
  double second = 0.0;  // I(a; b2)
  double joint = 0.0;   // I(a; (b1, b2))
  bool monotone = false;
};

/// Mutual information of the outcome with each attribute alone and with the
/// pair; `monotone` holds when neither projection exceeds the pair (+1e-12).
inline SubsetMi subset_mi_monotone(const DiscreteJoint3& t) {
  if (t.p.size() != t.A * t.B1 * t.B2) throw PreconditionError("3-way table size mismatch");
  DiscreteJoint j1{t.A, t.B1, std::vector<double>(t.A * t.B1, 0.0)};
  DiscreteJoint j2{t.A, t.B2, std::vector<double>(t.A * t.B2, 0.0)};
  DiscreteJoint j12{t.A, t.B1 * t.B2, t.p};
  for (std::size_t a = 0; a < t.A; ++a)
    for (std::size_t b1 = 0; b1 < t.B1; ++b1)
      for (std::size_t b2 = 0; b2 < t.B2; ++b2) {
        j1.p[a * t.B1 + b1] += t(a, b1, b2);
        j2.p[a * t.B2 + b2] += t(a, b1, b2);
      }
  SubsetMi r;
  r.joint = brute_mi(j12);
  r.first = brute_mi(j1);
  r.second = brute_mi(j2);
  r.monotone = r.first <= r.joint + 1e-12 && r.second <= r.joint + 1e-12;
  return r;
}

// ---------------------------------------------------------------------------
// Randomized suites

namespace detail {

inline std::vector<double> random_simplex(std::size_t n, std::mt19937_64& rng, bool allow_zeros) {
  std::exponential_distribution<double> e(1.0);
  std::bernoulli_distribution zero(0.15);
  std::vector<double> v(n);
  double total = 0.0;
  for (auto& x : v) {
    x = (allow_zeros && zero(rng)) ? 0.0 : e(rng) + 1e-3;
    total += x;
  }
  if (total == 0.0) {
    v[0] = 1.0;
    total = 1.0;
  }
  for (auto& x : v) x /= total;
  return v;
}

}  // namespace detail

inline DiscreteJoint random_joint(std::mt19937_64& rng, std::size_t max_a, std::size_t max_b) {
  std::uniform_int_distribution<std::size_t> da(1, max_a), db(1, max_b);
  DiscreteJoint j;
  j.A = da(rng);
  j.B = db(rng);
  j.p = detail::random_simplex(j.A * j.B, rng, true);
  return j;
}

/// Random conditional q(b | a) that is strictly positive.
inline std::vector<double> random_conditional(std::mt19937_64& rng, std::size_t A, std::size_t B) {
  std::vector<double> q;
  for (std::size_t a = 0; a < A; ++a) {
    auto row = detail::random_simplex(B, rng, false);
    q.insert(q.end(), row.begin(), row.end());
  }
  return q;
}

inline DiscreteJoint3 random_joint3(std::mt19937_64& rng, std::size_t max_dim) {
  std::uniform_int_distribution<std::size_t> d(1, max_dim);
  DiscreteJoint3 t;
  t.A = d(rng);
  t.B1 = d(rng);
  t.B2 = d(rng);
  t.p = detail::random_simplex(t.A * t.B1 * t.B2, rng, true);
  return t;
}

struct SuiteResult {
  std::string name;
  std::size_t cases = 0;
  double worst = 0.0;     // worst residual (or violation) observed
  double tolerance = 0.0;
  bool passed = false;
};

/// |H(s) + E log q + E log ratio - MI| over random joints (A <= 4, B <= 6).
inline SuiteResult decomposition_suite(std::uint64_t seed, std::size_t trials = 100) {
  std::mt19937_64 rng(seed);
  SuiteResult r{"variational-decomposition", trials, 0.0, 1e-10, true};
  for (std::size_t i = 0; i < trials; ++i) {
    const auto j = random_joint(rng, 4, 6);
    const auto q = random_conditional(rng, j.A, j.B);
    const double residual = std::abs(variational_decomposition(j, q).total - brute_mi(j));
    r.worst = std::max(r.worst, residual);
  }
  r.passed = r.worst < r.tolerance;
  return r;
}

/// Largest I(a; b_i) - I(a; (b1, b2)) over random 3-way tables (dims <= 3).
inline SuiteResult monotonicity_suite(std::uint64_t seed, std::size_t trials = 100) {
  std::mt19937_64 rng(seed);
  SuiteResult r{"subset-monotonicity", trials, -1.0, 1e-12, true};
  for (std::size_t i = 0; i < trials; ++i) {
    const auto m = subset_mi_monotone(random_joint3(rng, 3));
    r.worst = std::max({r.worst, m.first - m.joint, m.second - m.joint});
    r.passed = r.passed && m.monotone;
  }
  return r;
}

/// |MI| of random product joints, and the MI transpose symmetry residual.
inline SuiteResult independence_suite(std::uint64_t seed, std::size_t trials = 100) {
  std::mt19937_64 rng(seed);
  SuiteResult r{"independence-and-symmetry", trials, 0.0, 1e-12, true};
  std::uniform_int_distribution<std::size_t> d(1, 6);
  for (std::size_t i = 0; i < trials; ++i) {
    const std::size_t A = d(rng), B = d(rng);
    const auto pa = detail::random_simplex(A, rng, true);
    const auto pb = detail::random_simplex(B, rng, true);
    DiscreteJoint prod{A, B, std::vector<double>(A * B)};
    for (std::size_t a = 0; a < A; ++a)
      for (std::size_t b = 0; b < B; ++b) prod.p[a * B + b] = pa[a] * pb[b];
    // renormalize rounding so validate() accepts it
    double total = 0.0;
    for (double v : prod.p) total += v;
    for (auto& v : prod.p) v /= total;
    r.worst = std::max(r.worst, std::abs(brute_mi(prod)));

    const auto j = random_joint(rng, 4, 6);
    r.worst = std::max(r.worst, std::abs(brute_mi(j) - brute_mi(j.transposed())));
  }
  r.passed = r.worst < r.tolerance;
  return r;
}

}  // namespace infofair
