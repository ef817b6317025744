#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace rffdm::nn {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Parameter {
  Mat value;
  /// Accumulator written by Graph::backward; not part of the parameter's value.
  mutable Mat grad;
};

/// Named learnable arrays. Iteration order is lexicographic by name.
class ParamStore {
 public:
  Parameter& add(const std::string& name, Mat init);
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  void zero_grad();
  std::size_t num_scalars() const;
  std::size_t size() const noexcept { return params_.size(); }
  bool all_finite() const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  bool operator==(const ParamStore& other) const;

 private:
  std::map<std::string, Parameter> params_;
};

struct Var {
  std::int32_t id = -1;
};

/// Reverse-mode tape. Nodes are appended in evaluation order; backward walks them in reverse.
/// Parameter leaves alias the store, and their gradients accumulate straight into Parameter::grad.
class Graph {
 public:
  using Backward = std::function<void(Graph&, std::int32_t self)>;

  explicit Graph(bool record = true) : record_(record) {}

  bool recording() const noexcept { return record_; }

  Var constant(Mat value);
  Var param(const Parameter& p);
  Var push(Mat value, bool requires_grad, Backward back);

  const Mat& value(Var v) const;
  bool requires_grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].requires_grad; }
  /// Gradient buffer for v, allocated as zeros on first use.
  Mat& grad(Var v);
  Mat& grad(std::int32_t id) { return grad(Var{id}); }

  /// Seeds d(out)/d(out) = 1 for a 1x1 output and propagates.
  void backward(Var scalar_out);

  std::size_t num_nodes() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    const Mat* external = nullptr;
    Mat* external_grad = nullptr;
    Mat grad;
    bool requires_grad = false;
    Backward back;
  };

  bool record_;
  std::vector<Node> nodes_;
};

// Differentiable primitives. Shapes follow Eigen conventions (rows x cols).
Var matmul(Graph& g, Var a, Var b);
/// a * b^T
Var matmul_nt(Graph& g, Var a, Var b);
Var add(Graph& g, Var a, Var b);
/// Adds a 1 x cols row to every row of a.
Var add_row(Graph& g, Var a, Var row);
Var scale(Graph& g, Var a, double s);
/// tanh-approximated GELU.
Var gelu(Graph& g, Var a);
Var softmax_rows(Graph& g, Var a);
/// Normalizes each row to zero mean / unit variance, then applies per-column gain and bias.
Var layer_norm_rows(Graph& g, Var x, Var gain, Var bias, double eps = 1e-5);
/// Layer norm without affine parameters.
Var normalize_rows(Graph& g, Var x, double eps = 1e-5);
Var slice_cols(Graph& g, Var a, int start, int count);
Var concat_cols(Graph& g, const std::vector<Var>& parts);
Var concat_rows(Graph& g, Var top, Var bottom);
Var transpose(Graph& g, Var a);
/// Row-major reshape.
Var reshape(Graph& g, Var a, int rows, int cols);

/// Sum of squared differences divided by `denominator`.
Var squared_error(Graph& g, Var pred, const Mat& target, double denominator);
/// Cross-entropy of a 1 x N logit row against an integer label.
Var cross_entropy(Graph& g, Var logits, int label);

Mat softmax(const Mat& logits_row);

}  // namespace rffdm::nn
