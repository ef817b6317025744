#include "rffdm/nn/graph.hpp"

#include <cmath>
#include <cstring>
#include <memory>

#include "rffdm/errors.hpp"

namespace rffdm::nn {

Parameter& ParamStore::add(const std::string& name, Mat init) {
  if (params_.count(name)) throw ConfigError("duplicate parameter '" + name + "'");
  Parameter p;
  p.grad = Mat::Zero(init.rows(), init.cols());
  p.value = std::move(init);
  return params_.emplace(name, std::move(p)).first->second;
}

Parameter& ParamStore::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return it->second;
}

const Parameter& ParamStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return it->second;
}

void ParamStore::zero_grad() {
  for (auto& [_, p] : params_) p.grad.setZero();
}

std::size_t ParamStore::num_scalars() const {
  std::size_t n = 0;
  for (const auto& [_, p] : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

bool ParamStore::all_finite() const {
  for (const auto& [_, p] : params_)
    if (!p.value.allFinite()) return false;
  return true;
}

bool ParamStore::operator==(const ParamStore& other) const {
  if (params_.size() != other.params_.size()) return false;
  for (auto a = params_.begin(), b = other.params_.begin(); a != params_.end(); ++a, ++b) {
    if (a->first != b->first) return false;
    const Mat& x = a->second.value;
    const Mat& y = b->second.value;
    if (x.rows() != y.rows() || x.cols() != y.cols()) return false;
    if (std::memcmp(x.data(), y.data(), sizeof(double) * static_cast<std::size_t>(x.size())) != 0) return false;
  }
  return true;
}

Var Graph::constant(Mat value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

Var Graph::param(const Parameter& p) {
  Node n;
  n.external = &p.value;
  if (record_) {
    n.external_grad = &p.grad;
    n.requires_grad = true;
  }
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

Var Graph::push(Mat value, bool requires_grad, Backward back) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = record_ && requires_grad;
  if (n.requires_grad) n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

const Mat& Graph::value(Var v) const {
  const Node& n = nodes_[static_cast<std::size_t>(v.id)];
  return n.external ? *n.external : n.value;
}

Mat& Graph::grad(Var v) {
  Node& n = nodes_[static_cast<std::size_t>(v.id)];
  if (n.external_grad) return *n.external_grad;
  if (n.grad.size() == 0) {
    const Mat& val = n.external ? *n.external : n.value;
    n.grad = Mat::Zero(val.rows(), val.cols());
  }
  return n.grad;
}

void Graph::backward(Var out) {
  if (!record_) throw ConfigError("backward on a graph built without gradient recording");
  const Mat& v = value(out);
  if (v.rows() != 1 || v.cols() != 1) throw ShapeError("backward needs a scalar output");
  if (!requires_grad(out)) return;
  grad(out)(0, 0) += 1.0;
  for (auto i = static_cast<std::int32_t>(out.id); i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.back && n.grad.size() != 0) n.back(*this, i);
  }
}

namespace {

bool any_grad(Graph& g, std::initializer_list<Var> vs) {
  for (Var v : vs)
    if (g.requires_grad(v)) return true;
  return false;
}

void expect(bool cond, const char* what) {
  if (!cond) throw ShapeError(what);
}

}  // namespace

Var matmul(Graph& g, Var a, Var b) {
  expect(g.value(a).cols() == g.value(b).rows(), "matmul: inner dimensions differ");
  Mat out = g.value(a) * g.value(b);
  return g.push(std::move(out), any_grad(g, {a, b}), [a, b](Graph& g, std::int32_t self) {
    const Mat& d = g.grad(self);
    if (g.requires_grad(a)) g.grad(a).noalias() += d * g.value(b).transpose();
    if (g.requires_grad(b)) g.grad(b).noalias() += g.value(a).transpose() * d;
  });
}

Var matmul_nt(Graph& g, Var a, Var b) {
  expect(g.value(a).cols() == g.value(b).cols(), "matmul_nt: column counts differ");
  Mat out = g.value(a) * g.value(b).transpose();
  return g.push(std::move(out), any_grad(g, {a, b}), [a, b](Graph& g, std::int32_t self) {
    const Mat& d = g.grad(self);
    if (g.requires_grad(a)) g.grad(a).noalias() += d * g.value(b);
    if (g.requires_grad(b)) g.grad(b).noalias() += d.transpose() * g.value(a);
  });
}

Var add(Graph& g, Var a, Var b) {
  expect(g.value(a).rows() == g.value(b).rows() && g.value(a).cols() == g.value(b).cols(), "add: shapes differ");
  Mat out = g.value(a) + g.value(b);
  return g.push(std::move(out), any_grad(g, {a, b}), [a, b](Graph& g, std::int32_t self) {
    const Mat& d = g.grad(self);
    if (g.requires_grad(a)) g.grad(a) += d;
    if (g.requires_grad(b)) g.grad(b) += d;
  });
}

Var add_row(Graph& g, Var a, Var row) {
  expect(g.value(row).rows() == 1 && g.value(row).cols() == g.value(a).cols(), "add_row: row shape mismatch");
  Mat out = g.value(a).rowwise() + g.value(row).row(0);
  return g.push(std::move(out), any_grad(g, {a, row}), [a, row](Graph& g, std::int32_t self) {
    const Mat& d = g.grad(self);
    if (g.requires_grad(a)) g.grad(a) += d;
    if (g.requires_grad(row)) g.grad(row) += d.colwise().sum();
  });
}

Var scale(Graph& g, Var a, double s) {
  Mat out = g.value(a) * s;
  return g.push(std::move(out), g.requires_grad(a), [a, s](Graph& g, std::int32_t self) {
    g.grad(a) += g.grad(self) * s;
  });
}

Var gelu(Graph& g, Var a) {
  constexpr double c = 0.7978845608028654;  // sqrt(2/pi)
  const Mat& x = g.value(a);
  Mat out = x.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::tanh(c * (v + 0.044715 * v * v * v))); });
  return g.push(std::move(out), g.requires_grad(a), [a](Graph& g, std::int32_t self) {
    const Mat& x = g.value(a);
    const Mat& d = g.grad(self);
    Mat& ga = g.grad(a);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double v = x.data()[i];
      const double u = c * (v + 0.044715 * v * v * v);
      const double th = std::tanh(u);
      const double du = c * (1.0 + 3.0 * 0.044715 * v * v);
      ga.data()[i] += d.data()[i] * (0.5 * (1.0 + th) + 0.5 * v * (1.0 - th * th) * du);
    }
  });
}

Mat softmax(const Mat& logits) {
  Mat out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    out.row(r) = (logits.row(r).array() - m).exp();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

Var softmax_rows(Graph& g, Var a) {
  Mat out = softmax(g.value(a));
  return g.push(std::move(out), g.requires_grad(a), [a](Graph& g, std::int32_t self) {
    const Mat& y = g.value(Var{self});
    const Mat& d = g.grad(self);
    Mat& ga = g.grad(a);
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      const double dot = y.row(r).dot(d.row(r));
      ga.row(r).array() += y.row(r).array() * (d.row(r).array() - dot);
    }
  });
}

namespace {

struct RowStats {
  Mat xhat;
  Eigen::VectorXd inv_std;
};

RowStats normalize(const Mat& x, double eps) {
  RowStats s{Mat(x.rows(), x.cols()), Eigen::VectorXd(x.rows())};
  const double n = static_cast<double>(x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).sum() / n;
    const auto centered = x.row(r).array() - mean;
    const double var = centered.square().sum() / n;
    s.inv_std(r) = 1.0 / std::sqrt(var + eps);
    s.xhat.row(r) = centered * s.inv_std(r);
  }
  return s;
}

// d/dx of row normalization given upstream gradient w.r.t. xhat.
void normalize_backward(const Mat& xhat, const Eigen::VectorXd& inv_std, const Mat& dxhat, Mat& dx) {
  const double n = static_cast<double>(xhat.cols());
  for (Eigen::Index r = 0; r < xhat.rows(); ++r) {
    const double mean_d = dxhat.row(r).sum() / n;
    const double mean_dx = dxhat.row(r).dot(xhat.row(r)) / n;
    dx.row(r).array() += inv_std(r) * (dxhat.row(r).array() - mean_d - xhat.row(r).array() * mean_dx);
  }
}

}  // namespace

Var layer_norm_rows(Graph& g, Var x, Var gain, Var bias, double eps) {
  const Mat& xv = g.value(x);
  expect(g.value(gain).cols() == xv.cols() && g.value(bias).cols() == xv.cols(), "layer_norm: parameter width");
  auto stats = std::make_shared<RowStats>(normalize(xv, eps));
  Mat out = (stats->xhat.array().rowwise() * g.value(gain).row(0).array()).rowwise() + g.value(bias).row(0).array();
  return g.push(std::move(out), any_grad(g, {x, gain, bias}), [x, gain, bias, stats](Graph& g, std::int32_t self) {
    const Mat& d = g.grad(self);
    if (g.requires_grad(gain)) g.grad(gain) += (d.array() * stats->xhat.array()).colwise().sum().matrix();
    if (g.requires_grad(bias)) g.grad(bias) += d.colwise().sum();
    if (g.requires_grad(x)) {
      Mat dxhat = d.array().rowwise() * g.value(gain).row(0).array();
      normalize_backward(stats->xhat, stats->inv_std, dxhat, g.grad(x));
    }
  });
}

Var normalize_rows(Graph& g, Var x, double eps) {
  auto stats = std::make_shared<RowStats>(normalize(g.value(x), eps));
  Mat out = stats->xhat;
  return g.push(std::move(out), g.requires_grad(x), [x, stats](Graph& g, std::int32_t self) {
    normalize_backward(stats->xhat, stats->inv_std, g.grad(self), g.grad(x));
  });
}

Var slice_cols(Graph& g, Var a, int start, int count) {
  expect(start >= 0 && count > 0 && start + count <= g.value(a).cols(), "slice_cols: range out of bounds");
  Mat out = g.value(a).middleCols(start, count);
  return g.push(std::move(out), g.requires_grad(a), [a, start, count](Graph& g, std::int32_t self) {
    g.grad(a).middleCols(start, count) += g.grad(self);
  });
}

Var concat_cols(Graph& g, const std::vector<Var>& parts) {
  expect(!parts.empty(), "concat_cols: nothing to concatenate");
  const auto rows = g.value(parts.front()).rows();
  Eigen::Index cols = 0;
  bool needs = false;
  for (Var p : parts) {
    expect(g.value(p).rows() == rows, "concat_cols: row counts differ");
    cols += g.value(p).cols();
    needs = needs || g.requires_grad(p);
  }
  Mat out(rows, cols);
  Eigen::Index at = 0;
  for (Var p : parts) {
    out.middleCols(at, g.value(p).cols()) = g.value(p);
    at += g.value(p).cols();
  }
  return g.push(std::move(out), needs, [parts](Graph& g, std::int32_t self) {
    const Mat& d = g.grad(self);
    Eigen::Index at = 0;
    for (Var p : parts) {
      const auto c = g.value(p).cols();
      if (g.requires_grad(p)) g.grad(p) += d.middleCols(at, c);
      at += c;
    }
  });
}

Var concat_rows(Graph& g, Var top, Var bottom) {
  expect(g.value(top).cols() == g.value(bottom).cols(), "concat_rows: column counts differ");
  const auto rt = g.value(top).rows();
  Mat out(rt + g.value(bottom).rows(), g.value(top).cols());
  out.topRows(rt) = g.value(top);
  out.bottomRows(g.value(bottom).rows()) = g.value(bottom);
  return g.push(std::move(out), any_grad(g, {top, bottom}), [top, bottom, rt](Graph& g, std::int32_t self) {
    const Mat& d = g.grad(self);
    if (g.requires_grad(top)) g.grad(top) += d.topRows(rt);
    if (g.requires_grad(bottom)) g.grad(bottom) += d.bottomRows(d.rows() - rt);
  });
}

Var transpose(Graph& g, Var a) {
  Mat out = g.value(a).transpose();
  return g.push(std::move(out), g.requires_grad(a), [a](Graph& g, std::int32_t self) {
    g.grad(a) += g.grad(self).transpose();
  });
}

Var reshape(Graph& g, Var a, int rows, int cols) {
  const Mat& v = g.value(a);
  expect(static_cast<Eigen::Index>(rows) * cols == v.size(), "reshape: element count differs");
  const auto r0 = v.rows();
  const auto c0 = v.cols();
  Mat out = Eigen::Map<const Mat>(v.data(), rows, cols);
  return g.push(std::move(out), g.requires_grad(a), [a, r0, c0](Graph& g, std::int32_t self) {
    const Mat& d = g.grad(self);
    g.grad(a) += Eigen::Map<const Mat>(d.data(), r0, c0);
  });
}

Var squared_error(Graph& g, Var pred, const Mat& target, double denominator) {
  const Mat& p = g.value(pred);
  expect(p.rows() == target.rows() && p.cols() == target.cols(), "squared_error: shape mismatch");
  auto diff = std::make_shared<Mat>(p - target);
  Mat out(1, 1);
  out(0, 0) = diff->squaredNorm() / denominator;
  return g.push(std::move(out), g.requires_grad(pred), [pred, diff, denominator](Graph& g, std::int32_t self) {
    g.grad(pred) += (2.0 * g.grad(self)(0, 0) / denominator) * *diff;
  });
}

Var cross_entropy(Graph& g, Var logits, int label) {
  const Mat& z = g.value(logits);
  expect(z.rows() == 1, "cross_entropy: logits must be a single row");
  if (label < 0 || label >= z.cols()) throw ConfigError("cross_entropy: label out of range");
  auto probs = std::make_shared<Mat>(softmax(z));
  Mat out(1, 1);
  out(0, 0) = -std::log(std::max((*probs)(0, label), 1e-300));
  return g.push(std::move(out), g.requires_grad(logits), [logits, probs, label](Graph& g, std::int32_t self) {
    Mat d = *probs;
    d(0, label) -= 1.0;
    g.grad(logits) += g.grad(self)(0, 0) * d;
  });
}

}  // namespace rffdm::nn
