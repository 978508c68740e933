#pragma once

// Dense 64-bit tensors with a reverse-mode differentiation tape.
//
// A Tensor is a cheap shared handle. Operations are free functions that take
// the Tape they record on; when none of an operation's inputs requires a
// gradient, nothing is recorded and the result is a constant.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace infofair {

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Shape = std::vector<std::size_t>;

inline std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

namespace detail {

struct TensorData {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty when absent
  bool requires_grad = false;
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor from(Shape shape, std::vector<double> values,
                     bool requires_grad = false) {
    if (element_count(shape) != values.size()) {
      throw DimensionError("tensor shape " + to_string(shape) + " does not hold " +
                           std::to_string(values.size()) + " values");
    }
    Tensor t;
    t.data_ = std::make_shared<detail::TensorData>();
    t.data_->shape = std::move(shape);
    t.data_->values = std::move(values);
    t.data_->requires_grad = requires_grad;
    return t;
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    const auto n = element_count(shape);
    return from(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
  }

  static Tensor scalar(double v, bool requires_grad = false) {
    return from({}, {v}, requires_grad);
  }

  /// Row-major matrix from nested rows; all rows must have equal length.
  static Tensor matrix(const std::vector<std::vector<double>>& rows,
                       bool requires_grad = false) {
    const std::size_t m = rows.size();
    const std::size_t n = m ? rows.front().size() : 0;
    std::vector<double> v;
    v.reserve(m * n);
    for (const auto& r : rows) {
      if (r.size() != n) throw DimensionError("ragged matrix rows");
      v.insert(v.end(), r.begin(), r.end());
    }
    return from({m, n}, std::move(v), requires_grad);
  }

  static Tensor vector(std::vector<double> v, bool requires_grad = false) {
    const auto n = v.size();
    return from({n}, std::move(v), requires_grad);
  }

  explicit operator bool() const { return static_cast<bool>(data_); }

  const Shape& shape() const { return data_->shape; }
  std::size_t rank() const { return data_->shape.size(); }
  std::size_t size() const { return data_->values.size(); }
  std::size_t rows() const { return data_->shape.at(0); }
  std::size_t cols() const { return data_->shape.at(1); }

  std::span<const double> values() const { return data_->values; }
  std::span<double> mutable_values() { return data_->values; }
  double operator[](std::size_t i) const { return data_->values[i]; }
  double at(std::size_t i, std::size_t j) const {
    return data_->values[i * data_->shape[1] + j];
  }
  double item() const {
    if (size() != 1) throw DimensionError("item() on tensor of shape " + to_string(shape()));
    return data_->values.front();
  }

  bool requires_grad() const { return data_->requires_grad; }
  void set_requires_grad(bool on) { data_->requires_grad = on; }

  bool has_grad() const { return !data_->grad.empty(); }
  std::span<const double> grad() const { return data_->grad; }
  void clear_grad() { data_->grad.clear(); }

  /// Copy of the values with no gradient history.
  Tensor detach() const { return from(shape(), data_->values, false); }

  bool same(const Tensor& other) const { return data_ == other.data_; }

 private:
  friend class Tape;
  friend std::vector<double>& grad_buffer(const Tensor& t);
  friend const void* identity(const Tensor& t);

  std::shared_ptr<detail::TensorData> data_;
};

/// Gradient storage of `t`, allocated as zeros on first use.
inline std::vector<double>& grad_buffer(const Tensor& t) {
  auto& g = t.data_->grad;
  if (g.empty()) g.assign(t.data_->values.size(), 0.0);
  return g;
}

inline const void* identity(const Tensor& t) { return t.data_.get(); }

/// Ordered record of primitive operations. Nodes are appended as operations
/// run, so inputs always precede the operations that consume them.
class Tape {
 public:
  using BackwardFn = std::function<void(std::span<const double> out_grad)>;

  /// Builds the output tensor of an operation and, if any input requires a
  /// gradient, records its backward rule.
  Tensor record(const char* op, Shape shape, std::vector<double> values,
                std::vector<Tensor> inputs, BackwardFn backward) {
    for (double v : values) {
      if (!std::isfinite(v)) {
        throw NumericError(std::string("non-finite value produced by ") + op);
      }
    }
    const bool track = std::any_of(inputs.begin(), inputs.end(),
                                   [](const Tensor& t) { return t.requires_grad(); });
    Tensor out = Tensor::from(std::move(shape), std::move(values), track);
    if (track) {
      nodes_.push_back(Node{op, std::move(inputs), out, std::move(backward)});
    }
    return out;
  }

  std::size_t size() const { return nodes_.size(); }

  /// Populates grad on every requires_grad tensor the loss depends on.
  /// Gradients of tensors touched by this tape are reset first.
  void backward(const Tensor& loss) {
    if (backward_done_) {
      throw std::logic_error("backward called twice on the same tape; call reset()");
    }
    if (loss.size() != 1) {
      throw DimensionError("backward needs a scalar loss, got " + to_string(loss.shape()));
    }
    const auto on_tape = std::find_if(nodes_.begin(), nodes_.end(), [&](const Node& n) {
      return n.output.same(loss);
    });
    if (on_tape == nodes_.end()) {
      throw std::logic_error("loss was not produced on this tape");
    }
    backward_done_ = true;

    std::unordered_set<const void*> seen;
    std::vector<Tensor> touched;
    auto touch = [&](const Tensor& t) {
      if (t.requires_grad() && seen.insert(identity(t)).second) {
        t.data_->grad.clear();
        touched.push_back(t);
      }
    };
    for (const auto& n : nodes_) {
      for (const auto& in : n.inputs) touch(in);
      touch(n.output);
    }

    grad_buffer(loss)[0] = 1.0;
    const auto last = static_cast<std::size_t>(on_tape - nodes_.begin());
    for (std::size_t i = last + 1; i-- > 0;) {
      auto& n = nodes_[i];
      if (!n.output.has_grad()) continue;
      n.backward(n.output.grad());
    }

    for (const auto& t : touched) {
      for (double g : t.grad()) {
        if (!std::isfinite(g)) throw NumericError("non-finite gradient after backward");
      }
    }
  }

  void reset() {
    nodes_.clear();
    backward_done_ = false;
  }

 private:
  struct Node {
    const char* op;
    std::vector<Tensor> inputs;
    Tensor output;
    BackwardFn backward;
  };

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

namespace detail {

inline void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         ", got shape " + to_string(t.shape()));
  }
}

}  // namespace detail

inline Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  detail::require_rank(a, 2, "matmul");
  detail::require_rank(b, 2, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw DimensionError("matmul: inner dimensions disagree, " + to_string(a.shape()) +
                         " x " + to_string(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      if (aip == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += aip * bv[p * n + j];
    }
  }
  return tape.record("matmul", {m, n}, std::move(out), {a, b},
                     [a, b, m, k, n](std::span<const double> g) {
                       const auto av = a.values();
                       const auto bv = b.values();
                       if (a.requires_grad()) {
                         auto& ga = grad_buffer(a);
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t p = 0; p < k; ++p) {
                             double acc = 0.0;
                             for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * bv[p * n + j];
                             ga[i * k + p] += acc;
                           }
                       }
                       if (b.requires_grad()) {
                         auto& gb = grad_buffer(b);
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t p = 0; p < k; ++p) {
                             const double aip = av[i * k + p];
                             if (aip == 0.0) continue;
                             for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += aip * g[i * n + j];
                           }
                       }
                     });
}

/// x * w + b with b broadcast over rows.
inline Tensor affine(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& b) {
  detail::require_rank(b, 1, "affine");
  if (w.rank() != 2 || b.size() != w.cols()) {
    throw DimensionError("affine: bias " + to_string(b.shape()) + " does not match weight " +
                         to_string(w.shape()));
  }
  const Tensor xw = matmul(tape, x, w);
  const std::size_t m = xw.rows(), h = xw.cols();
  std::vector<double> out(xw.values().begin(), xw.values().end());
  const auto bv = b.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < h; ++j) out[i * h + j] += bv[j];
  return tape.record("affine", {m, h}, std::move(out), {xw, b},
                     [xw, b, m, h](std::span<const double> g) {
                       if (xw.requires_grad()) {
                         auto& gx = grad_buffer(xw);
                         for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                       }
                       if (b.requires_grad()) {
                         auto& gb = grad_buffer(b);
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t j = 0; j < h; ++j) gb[j] += g[i * h + j];
                       }
                     });
}

inline Tensor relu(Tape& tape, const Tensor& x) {
  std::vector<double> out(x.size());
  const auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  return tape.record("relu", x.shape(), std::move(out), {x}, [x](std::span<const double> g) {
    auto& gx = grad_buffer(x);
    const auto xv = x.values();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (xv[i] > 0.0) gx[i] += g[i];
  });
}

inline Tensor exp(Tape& tape, const Tensor& x) {
  std::vector<double> out(x.size());
  const auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(xv[i]);
  auto saved = std::make_shared<std::vector<double>>(out);
  return tape.record("exp", x.shape(), std::move(out), {x},
                     [x, saved](std::span<const double> g) {
                       auto& gx = grad_buffer(x);
                       for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (*saved)[i];
                     });
}

/// Row-wise log-softmax with max subtraction.
inline Tensor log_softmax(Tape& tape, const Tensor& x) {
  detail::require_rank(x, 2, "log_softmax");
  const std::size_t m = x.rows(), c = x.cols();
  if (c == 0) throw DimensionError("log_softmax: zero classes");
  std::vector<double> out(m * c);
  const auto xv = x.values();
  for (std::size_t i = 0; i < m; ++i) {
    const auto row = xv.subspan(i * c, c);
    const double mx = *std::max_element(row.begin(), row.end());
    double s = 0.0;
    for (double v : row) s += std::exp(v - mx);
    const double lse = mx + std::log(s);
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = row[j] - lse;
  }
  auto saved = std::make_shared<std::vector<double>>(out);
  return tape.record("log_softmax", {m, c}, std::move(out), {x},
                     [x, saved, m, c](std::span<const double> g) {
                       auto& gx = grad_buffer(x);
                       for (std::size_t i = 0; i < m; ++i) {
                         double gs = 0.0;
                         for (std::size_t j = 0; j < c; ++j) gs += g[i * c + j];
                         for (std::size_t j = 0; j < c; ++j)
                           gx[i * c + j] += g[i * c + j] - std::exp((*saved)[i * c + j]) * gs;
                       }
                     });
}

inline Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("add: shapes " + to_string(a.shape()) + " and " + to_string(b.shape()));
  }
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return tape.record("add", a.shape(), std::move(out), {a, b},
                     [a, b](std::span<const double> g) {
                       for (const Tensor* t : {&a, &b}) {
                         if (!t->requires_grad()) continue;
                         auto& gt = grad_buffer(*t);
                         for (std::size_t i = 0; i < g.size(); ++i) gt[i] += g[i];
                       }
                     });
}

inline Tensor scale(Tape& tape, const Tensor& x, double factor) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * factor;
  return tape.record("scale", x.shape(), std::move(out), {x},
                     [x, factor](std::span<const double> g) {
                       auto& gx = grad_buffer(x);
                       for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * factor;
                     });
}

inline Tensor sum(Tape& tape, const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  return tape.record("sum", {}, {s}, {x}, [x](std::span<const double> g) {
    auto& gx = grad_buffer(x);
    for (double& v : gx) v += g[0];
  });
}

inline Tensor mean(Tape& tape, const Tensor& x) {
  if (x.size() == 0) throw DimensionError("mean of empty tensor");
  return scale(tape, sum(tape, x), 1.0 / static_cast<double>(x.size()));
}

/// x[m x k] * w[k] -> [m]
inline Tensor matvec(Tape& tape, const Tensor& x, const Tensor& w) {
  detail::require_rank(x, 2, "matvec");
  detail::require_rank(w, 1, "matvec");
  const std::size_t m = x.rows(), k = x.cols();
  if (w.size() != k) {
    throw DimensionError("matvec: " + to_string(x.shape()) + " x " + to_string(w.shape()));
  }
  std::vector<double> out(m, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) out[i] += x[i * k + p] * w[p];
  return tape.record("matvec", {m}, std::move(out), {x, w},
                     [x, w, m, k](std::span<const double> g) {
                       if (x.requires_grad()) {
                         auto& gx = grad_buffer(x);
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t p = 0; p < k; ++p) gx[i * k + p] += g[i] * w[p];
                       }
                       if (w.requires_grad()) {
                         auto& gw = grad_buffer(w);
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t p = 0; p < k; ++p) gw[p] += g[i] * x[i * k + p];
                       }
                     });
}

/// Selects x[i][index_i] for every row.
inline Tensor pick(Tape& tape, const Tensor& x, std::span<const int> index) {
  detail::require_rank(x, 2, "pick");
  const std::size_t m = x.rows(), c = x.cols();
  if (index.size() != m) {
    throw DimensionError("pick: " + std::to_string(index.size()) + " indices for " +
                         std::to_string(m) + " rows");
  }
  std::vector<double> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (index[i] < 0 || static_cast<std::size_t>(index[i]) >= c) {
      throw std::out_of_range("label " + std::to_string(index[i]) + " at row " +
                              std::to_string(i) + " outside [0, " + std::to_string(c) + ")");
    }
    out[i] = x[i * c + static_cast<std::size_t>(index[i])];
  }
  std::vector<int> idx(index.begin(), index.end());
  return tape.record("pick", {m}, std::move(out), {x},
                     [x, idx = std::move(idx), c](std::span<const double> g) {
                       auto& gx = grad_buffer(x);
                       for (std::size_t i = 0; i < idx.size(); ++i)
                         gx[i * c + static_cast<std::size_t>(idx[i])] += g[i];
                     });
}

/// Keeps the listed rows of a matrix or entries of a vector, in order.
inline Tensor gather_rows(Tape& tape, const Tensor& x, std::span<const std::size_t> rows) {
  const std::size_t width = x.rank() == 2 ? x.cols() : 1;
  if (x.rank() != 1 && x.rank() != 2) throw DimensionError("gather_rows: rank must be 1 or 2");
  std::vector<double> out;
  out.reserve(rows.size() * width);
  for (std::size_t r : rows) {
    if (r >= x.shape()[0]) throw DimensionError("gather_rows: row out of range");
    for (std::size_t j = 0; j < width; ++j) out.push_back(x[r * width + j]);
  }
  Shape shape = x.rank() == 2 ? Shape{rows.size(), width} : Shape{rows.size()};
  std::vector<std::size_t> keep(rows.begin(), rows.end());
  return tape.record("gather_rows", std::move(shape), std::move(out), {x},
                     [x, keep = std::move(keep), width](std::span<const double> g) {
                       auto& gx = grad_buffer(x);
                       for (std::size_t i = 0; i < keep.size(); ++i)
                         for (std::size_t j = 0; j < width; ++j)
                           gx[keep[i] * width + j] += g[i * width + j];
                     });
}

/// Mean negative log-likelihood of the labelled class.
inline Tensor nll_loss(Tape& tape, const Tensor& log_probs, std::span<const int> labels) {
  return scale(tape, mean(tape, pick(tape, log_probs, labels)), -1.0);
}

/// Mean of log(1 + exp(-label * score)) for labels in {-1, +1}.
inline Tensor logistic_loss(Tape& tape, const Tensor& score, std::span<const int> labels) {
  detail::require_rank(score, 1, "logistic_loss");
  const std::size_t m = score.size();
  if (labels.size() != m) throw DimensionError("logistic_loss: label count mismatch");
  if (m == 0) throw DimensionError("logistic_loss: empty batch");
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (labels[i] != 1 && labels[i] != -1) {
      throw std::invalid_argument("logistic_loss labels must be +1 or -1");
    }
    const double z = -labels[i] * score[i];
    // log1p(exp(z)) without overflow
    total += z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
  }
  std::vector<int> lab(labels.begin(), labels.end());
  return tape.record("logistic_loss", {}, {total / static_cast<double>(m)}, {score},
                     [score, lab = std::move(lab), m](std::span<const double> g) {
                       auto& gs = grad_buffer(score);
                       for (std::size_t i = 0; i < m; ++i) {
                         const double z = -lab[i] * score[i];
                         const double sig = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z))
                                                     : std::exp(z) / (1.0 + std::exp(z));
                         gs[i] += g[0] * (-lab[i]) * sig / static_cast<double>(m);
                       }
                     });
}

}  // namespace infofair
