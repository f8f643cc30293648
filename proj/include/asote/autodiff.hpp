#ifndef ASOTE_AUTODIFF_HPP
#define ASOTE_AUTODIFF_HPP

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "asote/core.hpp"

namespace asote {

/// Uniform draw in [0,1) with the full 53-bit mantissa. Used everywhere a
/// random real is needed so that runs depend only on the mt19937_64 stream.
inline double uniform_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// A named weight matrix with its gradient and the optimizer's two moment
/// accumulators. Row vectors (1 x n) double as biases.
struct Parameter {
  std::string name;
  Eigen::MatrixXd value;
  Eigen::MatrixXd grad;
  Eigen::MatrixXd adam_m;
  Eigen::MatrixXd adam_v;

  void attach_buffers() {
    grad = Eigen::MatrixXd::Zero(value.rows(), value.cols());
    adam_m = grad;
    adam_v = grad;
  }
};

class ParameterSet {
 public:
  /// Uniform Glorot initialization over fan-in + fan-out.
  Parameter* create(const std::string& name, Eigen::Index rows,
                    Eigen::Index cols, std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Parameter* p = allocate(name, rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c)
        p->value(r, c) = limit * (2.0 * uniform_unit(rng) - 1.0);
    return p;
  }

  Parameter* create_zero(const std::string& name, Eigen::Index rows,
                         Eigen::Index cols) {
    return allocate(name, rows, cols);
  }

  Parameter* find(const std::string& name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end())
      throw config_error("no parameter named '" + name + "'");
    return it->second;
  }

  bool contains(const std::string& name) const {
    return by_name_.count(name) != 0;
  }

  const std::vector<std::unique_ptr<Parameter>>& all() const { return params_; }

  void zero_grads() {
    for (auto& p : params_) p->grad.setZero();
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
    return n;
  }

 private:
  Parameter* allocate(const std::string& name, Eigen::Index rows,
                      Eigen::Index cols) {
    if (by_name_.count(name))
      throw config_error("duplicate parameter name '" + name + "'");
    auto p = std::make_unique<Parameter>();
    p->name = name;
    p->value = Eigen::MatrixXd::Zero(rows, cols);
    p->attach_buffers();
    Parameter* raw = p.get();
    params_.push_back(std::move(p));
    by_name_[name] = raw;
    return raw;
  }

  std::vector<std::unique_ptr<Parameter>> params_;
  std::map<std::string, Parameter*> by_name_;
};

class Tape;

/// Handle into a Tape node. Valid until the tape is cleared.
struct Var {
  int id = -1;
};

/// Reverse-mode tape over dense matrices. Build the expression through the
/// factory methods, then call backward on a 1x1 result; parameter gradients
/// accumulate into Parameter::grad.
class Tape {
 public:
  const Eigen::MatrixXd& value(Var v) const { return node(v).value; }
  const Eigen::MatrixXd& grad(Var v) const { return node(v).grad; }

  void clear() { nodes_.clear(); }
  std::size_t size() const { return nodes_.size(); }

  Var constant(Eigen::MatrixXd v) { return push(std::move(v), nullptr); }

  Var parameter(Parameter* p) {
    Var out = push(p->value, nullptr);
    nodes_.back().back = [p](Tape& t, int id) { p->grad += t.nodes_[id].grad; };
    return out;
  }

  /// Row gather; repeated indices are allowed (their gradients add up).
  Var rows(Var m, std::vector<int> idx) {
    const Eigen::MatrixXd& src = node(m).value;
    Eigen::MatrixXd v(static_cast<Eigen::Index>(idx.size()), src.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (idx[i] < 0 || idx[i] >= src.rows())
        throw data_error("row index " + std::to_string(idx[i]) +
                         " outside table of " + std::to_string(src.rows()) +
                         " rows");
      v.row(static_cast<Eigen::Index>(i)) = src.row(idx[i]);
    }
    Var out = push(std::move(v), nullptr);
    nodes_.back().back = [m, idx = std::move(idx)](Tape& t, int id) {
      for (std::size_t i = 0; i < idx.size(); ++i)
        t.nodes_[m.id].grad.row(idx[i]) +=
            t.nodes_[id].grad.row(static_cast<Eigen::Index>(i));
    };
    return out;
  }

  Var row(Var m, int r) { return rows(m, std::vector<int>{r}); }

  Var cols(Var m, Eigen::Index offset, Eigen::Index width) {
    const Eigen::MatrixXd& src = node(m).value;
    if (offset < 0 || offset + width > src.cols())
      throw validation_error("column slice outside matrix");
    Var out = push(src.middleCols(offset, width), nullptr);
    nodes_.back().back = [m, offset, width](Tape& t, int id) {
      t.nodes_[m.id].grad.middleCols(offset, width) += t.nodes_[id].grad;
    };
    return out;
  }

  Var stack_rows(const std::vector<Var>& rs) {
    if (rs.empty()) throw validation_error("cannot stack zero rows");
    const Eigen::Index c = node(rs[0]).value.cols();
    Eigen::MatrixXd v(static_cast<Eigen::Index>(rs.size()), c);
    for (std::size_t i = 0; i < rs.size(); ++i) {
      const Eigen::MatrixXd& r = node(rs[i]).value;
      if (r.rows() != 1 || r.cols() != c)
        throw validation_error("stack_rows expects 1-row blocks of one width");
      v.row(static_cast<Eigen::Index>(i)) = r;
    }
    Var out = push(std::move(v), nullptr);
    nodes_.back().back = [rs](Tape& t, int id) {
      for (std::size_t i = 0; i < rs.size(); ++i)
        t.nodes_[rs[i].id].grad +=
            t.nodes_[id].grad.row(static_cast<Eigen::Index>(i));
    };
    return out;
  }

  Var matmul(Var a, Var b) {
    const auto& va = node(a).value;
    const auto& vb = node(b).value;
    if (va.cols() != vb.rows()) throw validation_error("matmul shape mismatch");
    Var out = push(va * vb, nullptr);
    nodes_.back().back = [a, b](Tape& t, int id) {
      const auto& g = t.nodes_[id].grad;
      t.nodes_[a.id].grad += g * t.nodes_[b.id].value.transpose();
      t.nodes_[b.id].grad += t.nodes_[a.id].value.transpose() * g;
    };
    return out;
  }

  Var add(Var a, Var b) {
    const auto& va = node(a).value;
    const auto& vb = node(b).value;
    if (va.rows() != vb.rows() || va.cols() != vb.cols())
      throw validation_error("add shape mismatch");
    Var out = push(va + vb, nullptr);
    nodes_.back().back = [a, b](Tape& t, int id) {
      t.nodes_[a.id].grad += t.nodes_[id].grad;
      t.nodes_[b.id].grad += t.nodes_[id].grad;
    };
    return out;
  }

  /// Adds a 1 x C row vector to every row of an N x C matrix.
  Var add_rowvec(Var m, Var v) {
    const auto& vm = node(m).value;
    const auto& vv = node(v).value;
    if (vv.rows() != 1 || vv.cols() != vm.cols())
      throw validation_error("add_rowvec shape mismatch");
    Var out = push(vm.rowwise() + vv.row(0), nullptr);
    nodes_.back().back = [m, v](Tape& t, int id) {
      t.nodes_[m.id].grad += t.nodes_[id].grad;
      t.nodes_[v.id].grad += t.nodes_[id].grad.colwise().sum();
    };
    return out;
  }

  Var cwise_mul(Var a, Var b) {
    const auto& va = node(a).value;
    const auto& vb = node(b).value;
    if (va.rows() != vb.rows() || va.cols() != vb.cols())
      throw validation_error("cwise_mul shape mismatch");
    Var out = push(va.cwiseProduct(vb), nullptr);
    nodes_.back().back = [a, b](Tape& t, int id) {
      const auto& g = t.nodes_[id].grad;
      t.nodes_[a.id].grad += g.cwiseProduct(t.nodes_[b.id].value);
      t.nodes_[b.id].grad += g.cwiseProduct(t.nodes_[a.id].value);
    };
    return out;
  }

  Var sigmoid(Var x) {
    Eigen::MatrixXd s =
        node(x).value.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
    Var out = push(std::move(s), nullptr);
    nodes_.back().back = [x](Tape& t, int id) {
      const auto& s = t.nodes_[id].value;
      t.nodes_[x.id].grad += t.nodes_[id].grad.cwiseProduct(
          s.cwiseProduct((1.0 - s.array()).matrix()));
    };
    return out;
  }

  Var tanh_(Var x) {
    Eigen::MatrixXd s = node(x).value.array().tanh().matrix();
    Var out = push(std::move(s), nullptr);
    nodes_.back().back = [x](Tape& t, int id) {
      const auto& s = t.nodes_[id].value;
      t.nodes_[x.id].grad += t.nodes_[id].grad.cwiseProduct(
          (1.0 - s.array().square()).matrix());
    };
    return out;
  }

  Var concat_cols(Var a, Var b) {
    const auto& va = node(a).value;
    const auto& vb = node(b).value;
    if (va.rows() != vb.rows())
      throw validation_error("concat_cols row mismatch");
    Eigen::MatrixXd v(va.rows(), va.cols() + vb.cols());
    v << va, vb;
    Var out = push(std::move(v), nullptr);
    const Eigen::Index ca = va.cols(), cb = vb.cols();
    nodes_.back().back = [a, b, ca, cb](Tape& t, int id) {
      t.nodes_[a.id].grad += t.nodes_[id].grad.leftCols(ca);
      t.nodes_[b.id].grad += t.nodes_[id].grad.rightCols(cb);
    };
    return out;
  }

  Var mean_rows(Var m) {
    const auto& v = node(m).value;
    if (v.rows() == 0) throw validation_error("mean over zero rows");
    Eigen::MatrixXd mean = v.colwise().mean();
    Var out = push(std::move(mean), nullptr);
    const double inv = 1.0 / static_cast<double>(v.rows());
    nodes_.back().back = [m, inv](Tape& t, int id) {
      t.nodes_[m.id].grad +=
          (t.nodes_[id].grad * inv).replicate(t.nodes_[m.id].grad.rows(), 1);
    };
    return out;
  }

  /// Inverted dropout: kept entries are rescaled by 1/(1-rate) so inference
  /// needs no compensation. A disabled call is the identity.
  Var dropout(Var x, double rate, std::mt19937_64& rng, bool enabled) {
    if (!enabled || rate <= 0.0) return x;
    if (rate >= 1.0) throw config_error("dropout rate must be below 1");
    const auto& v = node(x).value;
    Eigen::MatrixXd mask(v.rows(), v.cols());
    const double keep = 1.0 - rate;
    for (Eigen::Index r = 0; r < v.rows(); ++r)
      for (Eigen::Index c = 0; c < v.cols(); ++c)
        mask(r, c) = uniform_unit(rng) < keep ? 1.0 / keep : 0.0;
    Var out = push(v.cwiseProduct(mask), nullptr);
    nodes_.back().back = [x, mask = std::move(mask)](Tape& t, int id) {
      t.nodes_[x.id].grad += t.nodes_[id].grad.cwiseProduct(mask);
    };
    return out;
  }

  Var scale(Var x, double s) {
    Var out = push(node(x).value * s, nullptr);
    nodes_.back().back = [x, s](Tape& t, int id) {
      t.nodes_[x.id].grad += t.nodes_[id].grad * s;
    };
    return out;
  }

  Var add_all(const std::vector<Var>& xs) {
    if (xs.empty()) throw validation_error("cannot sum zero terms");
    Var acc = xs[0];
    for (std::size_t i = 1; i < xs.size(); ++i) acc = add(acc, xs[i]);
    return acc;
  }

  /// Summed cross-entropy of row-wise softmax at the gold classes, restricted
  /// to active rows. Fused for numerical stability; returns a 1x1 node.
  Var softmax_ce(Var logits, const std::vector<int>& gold,
                 const std::vector<char>& active) {
    const auto& z = node(logits).value;
    if (static_cast<Eigen::Index>(gold.size()) != z.rows() ||
        gold.size() != active.size())
      throw validation_error("loss targets do not match logit rows");
    double loss = 0.0;
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      if (!active[static_cast<std::size_t>(i)]) continue;
      const int g = gold[static_cast<std::size_t>(i)];
      if (g < 0 || g >= z.cols())
        throw data_error("gold class " + std::to_string(g) +
                         " outside the " + std::to_string(z.cols()) +
                         "-class set");
      const double m = z.row(i).maxCoeff();
      const double lse = m + std::log((z.row(i).array() - m).exp().sum());
      loss += lse - z(i, g);
    }
    Var out = push(Eigen::MatrixXd::Constant(1, 1, loss), nullptr);
    nodes_.back().back = [logits, gold, active](Tape& t, int id) {
      const double g = t.nodes_[id].grad(0, 0);
      const auto& z = t.nodes_[logits.id].value;
      auto& gz = t.nodes_[logits.id].grad;
      for (Eigen::Index i = 0; i < z.rows(); ++i) {
        if (!active[static_cast<std::size_t>(i)]) continue;
        const double m = z.row(i).maxCoeff();
        Eigen::RowVectorXd p = (z.row(i).array() - m).exp();
        p /= p.sum();
        p(gold[static_cast<std::size_t>(i)]) -= 1.0;
        gz.row(i) += g * p;
      }
    };
    return out;
  }

  /// Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse, pushing
  /// gradients into every Parameter reached.
  void backward(Var loss) {
    auto& n = node(loss);
    if (n.value.rows() != 1 || n.value.cols() != 1)
      throw validation_error("backward needs a scalar (1x1) result");
    n.grad(0, 0) = 1.0;
    for (int i = loss.id; i >= 0; --i)
      if (nodes_[static_cast<std::size_t>(i)].back)
        nodes_[static_cast<std::size_t>(i)].back(*this, i);
  }

 private:
  struct Node {
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;
    std::function<void(Tape&, int)> back;
  };

  Node& node(Var v) {
    if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size())
      throw validation_error("expired tape handle");
    return nodes_[static_cast<std::size_t>(v.id)];
  }
  const Node& node(Var v) const {
    return const_cast<Tape*>(this)->node(v);
  }

  Var push(Eigen::MatrixXd v, std::function<void(Tape&, int)> back) {
    Node n;
    n.value = std::move(v);
    n.grad = Eigen::MatrixXd::Zero(n.value.rows(), n.value.cols());
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  std::vector<Node> nodes_;
};

/// Adam with bias correction; one step() consumes the gradients currently in
/// the set and leaves them untouched (callers zero them per batch).
class AdamOptimizer {
 public:
  explicit AdamOptimizer(double lr = 2e-5, double beta1 = 0.9,
                         double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(ParameterSet& params) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, t_);
    const double c2 = 1.0 - std::pow(beta2_, t_);
    for (auto& p : params.all()) {
      p->adam_m = beta1_ * p->adam_m + (1.0 - beta1_) * p->grad;
      p->adam_v = (beta2_ * p->adam_v.array() +
                   (1.0 - beta2_) * p->grad.array().square())
                      .matrix();
      p->value.array() -= lr_ * (p->adam_m.array() / c1) /
                          ((p->adam_v.array() / c2).sqrt() + eps_);
    }
  }

  double learning_rate() const { return lr_; }
  long long steps_taken() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long long t_ = 0;
};

}  // namespace asote

#endif  // ASOTE_AUTODIFF_HPP
