#pragma once

#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "dcmgnn/common.hpp"
#include "dcmgnn/sparse.hpp"

// Minimal reverse-mode differentiation over dense row-major matrices. A Tape
// records every intermediate value; backward() walks the records in reverse
// and accumulates gradients into the sinks registered for parameters.
namespace dcmgnn::ad {

class Tape;

struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const;  // value of a 1x1 var
};

class Tape {
 public:
  // grad_out is the gradient of the output, value_out its forward value.
  using Backward = std::function<void(Tape&, const Matrix& grad_out, const Matrix& value_out)>;

  Var constant(Matrix value);
  // backward() adds d(root)/d(value) into *grad_sink, which must already have
  // the shape of `value`. A null sink makes the var a constant.
  Var parameter(const Matrix& value, Matrix* grad_sink);

  Var record(Matrix value, std::span<const Var> inputs, Backward back);
  Var record(Matrix value, std::initializer_list<Var> inputs, Backward back) {
    return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(back));
  }

  const Matrix& value(int id) const { return nodes_[id].value; }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

  // Gradient accumulation used by op implementations.
  template <class Derived>
  void accumulate(Var v, const Eigen::MatrixBase<Derived>& g) {
    auto& node = nodes_[v.id];
    if (!node.requires_grad) return;
    if (node.grad.size() == 0) {
      node.grad = g;
    } else {
      node.grad += g;
    }
  }
  Matrix& grad_buffer(Var v);  // zero-initialized on first use

  // Seeds d(root)/d(root) = 1; root must be 1x1.
  void backward(Var root);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backward back;
    Matrix* sink = nullptr;
    bool requires_grad = false;
  };
  std::deque<Node> nodes_;
};

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var a, double c);
Var mul_scalar(Var s, Var x);  // s is 1x1
Var hadamard(Var a, Var b);
Var add_n(std::span<const Var> terms);

Var matmul(Var a, Var b);     // a b
Var matmul_tn(Var a, Var b);  // a^T b
Var matmul_nt(Var a, Var b);  // a b^T

// A x for a fixed sparse matrix; `a` must outlive the tape.
Var spmm(const Csr& a, Var x);
// A x where A has the structure of `pattern` and entries `values` (nnz x 1).
Var spmm_values(const Csr& pattern, Var values, Var x);
// D^{-1/2} A D^{-1/2} on the stored entries of `pattern`; D from row sums.
Var symmetric_normalize(const Csr& pattern, Var values);

Var softmax(Var column);
Var softplus(Var x);
Var log_sigmoid(Var x);
Var leaky_relu(Var x, double slope);
Var pow_positive(Var x, double exponent);  // entries <= 0 map to 0

// C diag(lambda) for a fixed matrix C (must outlive the tape) and column lambda.
Var scale_columns(const Matrix& c, Var lambda);
Var row_scale(Var x, Var s);  // diag(s) x, s is n x 1
Var col_sum(Var x);           // 1 x k
Var row_dot(Var a, Var b);    // n x 1
// Rows divided by their L2 norm; zero rows stay zero and bump *zero_rows.
Var l2_normalize_rows(Var x, int* zero_rows = nullptr);
Var logsumexp_rows(Var x);  // n x 1
Var softmax_rows(Var x);
Var diagonal(Var x);        // n x 1

Var gather_rows(Var x, std::span<const NodeId> rows);
Var column(Var x, Eigen::Index j);  // n x 1
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var broadcast(Var s, Eigen::Index rows, Eigen::Index cols);  // s is 1x1

Var sum(Var x);
Var mean(Var x);
Var sum_squares(Var x);

}  // namespace dcmgnn::ad
