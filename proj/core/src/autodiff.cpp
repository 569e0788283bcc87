#include "dcmgnn/autodiff.hpp"

#include <cmath>
#include <limits>

namespace dcmgnn::ad {
namespace {

void require(bool ok, const char* what) {
  if (!ok) throw ShapeError(what);
}

double stable_softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tape& tape_of(Var v) {
  require(v.tape != nullptr, "autodiff: var is not attached to a tape");
  return *v.tape;
}

}  // namespace

const Matrix& Var::value() const { return tape->value(id); }

double Var::scalar() const {
  const auto& v = value();
  require(v.rows() == 1 && v.cols() == 1, "autodiff: scalar() on non-scalar var");
  return v(0, 0);
}

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, {}, nullptr, false});
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::parameter(const Matrix& value, Matrix* grad_sink) {
  if (grad_sink != nullptr) {
    require(grad_sink->rows() == value.rows() && grad_sink->cols() == value.cols(),
            "autodiff: gradient sink shape mismatch");
  }
  nodes_.push_back(Node{value, {}, {}, grad_sink, grad_sink != nullptr});
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::record(Matrix value, std::span<const Var> inputs, Backward back) {
  bool needs = false;
  for (const auto& in : inputs) {
    require(in.tape == this, "autodiff: mixing vars from different tapes");
    needs = needs || nodes_[in.id].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), {}, needs ? std::move(back) : Backward{}, nullptr, needs});
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Matrix& Tape::grad_buffer(Var v) {
  auto& node = nodes_[v.id];
  if (node.grad.size() == 0) node.grad = Matrix::Zero(node.value.rows(), node.value.cols());
  return node.grad;
}

void Tape::backward(Var root) {
  require(root.tape == this, "autodiff: root from another tape");
  require(value(root.id).size() == 1, "autodiff: backward() needs a scalar root");
  if (!nodes_[root.id].requires_grad) return;
  nodes_[root.id].grad = Matrix::Ones(1, 1);
  for (int i = root.id; i >= 0; --i) {
    auto& node = nodes_[i];
    if (!node.requires_grad || node.grad.size() == 0) continue;
    if (node.back) node.back(*this, node.grad, node.value);
    if (node.sink != nullptr) *node.sink += node.grad;
  }
}

Var add(Var a, Var b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "add: shape mismatch");
  return tape_of(a).record(a.value() + b.value(), {a, b}, [a, b](Tape& t, const Matrix& g, const Matrix&) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var sub(Var a, Var b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "sub: shape mismatch");
  return tape_of(a).record(a.value() - b.value(), {a, b}, [a, b](Tape& t, const Matrix& g, const Matrix&) {
    t.accumulate(a, g);
    t.accumulate(b, -g);
  });
}

Var scale(Var a, double c) {
  return tape_of(a).record(c * a.value(), {a}, [a, c](Tape& t, const Matrix& g, const Matrix&) {
    t.accumulate(a, c * g);
  });
}

Var mul_scalar(Var s, Var x) {
  require(s.rows() == 1 && s.cols() == 1, "mul_scalar: first operand must be 1x1");
  return tape_of(x).record(s.scalar() * x.value(), {s, x}, [s, x](Tape& t, const Matrix& g, const Matrix&) {
    Matrix gs(1, 1);
    gs(0, 0) = g.cwiseProduct(x.value()).sum();
    t.accumulate(s, gs);
    t.accumulate(x, s.scalar() * g);
  });
}

Var hadamard(Var a, Var b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "hadamard: shape mismatch");
  return tape_of(a).record(a.value().cwiseProduct(b.value()), {a, b},
                           [a, b](Tape& t, const Matrix& g, const Matrix&) {
                             t.accumulate(a, g.cwiseProduct(b.value()));
                             t.accumulate(b, g.cwiseProduct(a.value()));
                           });
}

Var add_n(std::span<const Var> terms) {
  require(!terms.empty(), "add_n: no terms");
  Matrix out = terms[0].value();
  for (std::size_t i = 1; i < terms.size(); ++i) {
    require(terms[i].rows() == out.rows() && terms[i].cols() == out.cols(), "add_n: shape mismatch");
    out += terms[i].value();
  }
  std::vector<Var> inputs(terms.begin(), terms.end());
  return tape_of(terms[0]).record(std::move(out), inputs, [inputs](Tape& t, const Matrix& g, const Matrix&) {
    for (const auto& v : inputs) t.accumulate(v, g);
  });
}

Var matmul(Var a, Var b) {
  require(a.cols() == b.rows(), "matmul: inner dimension mismatch");
  return tape_of(a).record(a.value() * b.value(), {a, b}, [a, b](Tape& t, const Matrix& g, const Matrix&) {
    if (t.requires_grad(a)) t.accumulate(a, g * b.value().transpose());
    if (t.requires_grad(b)) t.accumulate(b, a.value().transpose() * g);
  });
}

Var matmul_tn(Var a, Var b) {
  require(a.rows() == b.rows(), "matmul_tn: inner dimension mismatch");
  return tape_of(a).record(a.value().transpose() * b.value(), {a, b},
                           [a, b](Tape& t, const Matrix& g, const Matrix&) {
                             if (t.requires_grad(a)) t.accumulate(a, b.value() * g.transpose());
                             if (t.requires_grad(b)) t.accumulate(b, a.value() * g);
                           });
}

Var matmul_nt(Var a, Var b) {
  require(a.cols() == b.cols(), "matmul_nt: inner dimension mismatch");
  return tape_of(a).record(a.value() * b.value().transpose(), {a, b},
                           [a, b](Tape& t, const Matrix& g, const Matrix&) {
                             if (t.requires_grad(a)) t.accumulate(a, g * b.value());
                             if (t.requires_grad(b)) t.accumulate(b, g.transpose() * a.value());
                           });
}

Var spmm(const Csr& a, Var x) {
  const Csr* pa = &a;
  return tape_of(x).record(dcmgnn::spmm(a, x.value()), {x}, [pa, x](Tape& t, const Matrix& g, const Matrix&) {
    if (pa->values.empty()) {
      std::vector<double> ones(pa->nnz(), 1.0);
      t.accumulate(x, spmm_transposed(*pa, ones, g));
    } else {
      t.accumulate(x, spmm_transposed(*pa, pa->values, g));
    }
  });
}

Var spmm_values(const Csr& pattern, Var values, Var x) {
  require(values.cols() == 1 && static_cast<std::size_t>(values.rows()) == pattern.nnz(),
          "spmm_values: one value per stored entry expected");
  const Csr* pa = &pattern;
  const std::span<const double> vals(values.value().data(), pattern.nnz());
  return tape_of(x).record(
      dcmgnn::spmm(pattern, vals, x.value()), {values, x}, [pa, values, x](Tape& t, const Matrix& g, const Matrix&) {
        const std::span<const double> v(values.value().data(), pa->nnz());
        if (t.requires_grad(x)) t.accumulate(x, spmm_transposed(*pa, v, g));
        if (t.requires_grad(values)) {
          Matrix& gv = t.grad_buffer(values);
          const Matrix& xv = x.value();
          for (std::int64_t r = 0; r < pa->rows; ++r) {
            for (auto k = pa->row_ptr[r]; k < pa->row_ptr[r + 1]; ++k) {
              gv(k, 0) += g.row(r).dot(xv.row(pa->col[k]));
            }
          }
        }
      });
}

Var symmetric_normalize(const Csr& pattern, Var values) {
  require(values.cols() == 1 && static_cast<std::size_t>(values.rows()) == pattern.nnz(),
          "symmetric_normalize: one value per stored entry expected");
  const Csr* pa = &pattern;
  const std::span<const double> vals(values.value().data(), pattern.nnz());
  const auto normalized = dcmgnn::symmetric_normalize(pattern, vals);
  Matrix out = Eigen::Map<const Matrix>(normalized.data(), static_cast<Eigen::Index>(normalized.size()), 1);
  return tape_of(values).record(std::move(out), {values}, [pa, values](Tape& t, const Matrix& g, const Matrix& y) {
    const Matrix& v = values.value();
    const Vector deg = row_sums(*pa, std::span<const double>(v.data(), pa->nnz()));
    Vector gdeg = Vector::Zero(deg.size());
    Matrix gv = Matrix::Zero(v.rows(), 1);
    for (std::int64_t r = 0; r < pa->rows; ++r) {
      for (auto k = pa->row_ptr[r]; k < pa->row_ptr[r + 1]; ++k) {
        const auto c = pa->col[k];
        if (deg[r] <= 0.0 || deg[c] <= 0.0) continue;
        gv(k, 0) += g(k, 0) / std::sqrt(deg[r] * deg[c]);
        const double common = -0.5 * g(k, 0) * y(k, 0);
        gdeg[r] += common / deg[r];
        gdeg[c] += common / deg[c];
      }
    }
    for (std::int64_t r = 0; r < pa->rows; ++r) {
      for (auto k = pa->row_ptr[r]; k < pa->row_ptr[r + 1]; ++k) gv(k, 0) += gdeg[r];
    }
    t.accumulate(values, gv);
  });
}

Var softmax(Var column) {
  require(column.cols() == 1, "softmax: column vector expected");
  const Matrix& x = column.value();
  const double mx = x.maxCoeff();
  Matrix y = (x.array() - mx).exp().matrix();
  y /= y.sum();
  return tape_of(column).record(std::move(y), {column}, [column](Tape& t, const Matrix& g, const Matrix& y) {
    const double dot = g.cwiseProduct(y).sum();
    t.accumulate(column, y.cwiseProduct((g.array() - dot).matrix()));
  });
}

Var softplus(Var x) {
  Matrix y = x.value().unaryExpr([](double v) { return stable_softplus(v); });
  return tape_of(x).record(std::move(y), {x}, [x](Tape& t, const Matrix& g, const Matrix&) {
    t.accumulate(x, g.cwiseProduct(x.value().unaryExpr([](double v) { return sigmoid(v); })));
  });
}

Var log_sigmoid(Var x) {
  Matrix y = x.value().unaryExpr([](double v) { return -stable_softplus(-v); });
  return tape_of(x).record(std::move(y), {x}, [x](Tape& t, const Matrix& g, const Matrix&) {
    t.accumulate(x, g.cwiseProduct(x.value().unaryExpr([](double v) { return sigmoid(-v); })));
  });
}

Var leaky_relu(Var x, double slope) {
  Matrix y = x.value().unaryExpr([slope](double v) { return v > 0 ? v : slope * v; });
  return tape_of(x).record(std::move(y), {x}, [x, slope](Tape& t, const Matrix& g, const Matrix&) {
    t.accumulate(x, g.cwiseProduct(x.value().unaryExpr([slope](double v) { return v > 0 ? 1.0 : slope; })));
  });
}

Var pow_positive(Var x, double exponent) {
  Matrix y = x.value().unaryExpr([exponent](double v) { return v > 0 ? std::pow(v, exponent) : 0.0; });
  return tape_of(x).record(std::move(y), {x}, [x, exponent](Tape& t, const Matrix& g, const Matrix&) {
    const Matrix d = x.value().unaryExpr(
        [exponent](double v) { return v > 0 ? exponent * std::pow(v, exponent - 1.0) : 0.0; });
    t.accumulate(x, g.cwiseProduct(d));
  });
}

Var scale_columns(const Matrix& c, Var lambda) {
  require(lambda.cols() == 1 && lambda.rows() == c.cols(), "scale_columns: lambda must be k x 1");
  const Matrix* pc = &c;
  Matrix y = c * lambda.value().col(0).asDiagonal();
  return tape_of(lambda).record(std::move(y), {lambda}, [pc, lambda](Tape& t, const Matrix& g, const Matrix&) {
    t.accumulate(lambda, g.cwiseProduct(*pc).colwise().sum().transpose());
  });
}

Var row_scale(Var x, Var s) {
  require(s.cols() == 1 && s.rows() == x.rows(), "row_scale: scale must be n x 1");
  Matrix y = s.value().col(0).asDiagonal() * x.value();
  return tape_of(x).record(std::move(y), {x, s}, [x, s](Tape& t, const Matrix& g, const Matrix&) {
    if (t.requires_grad(x)) t.accumulate(x, s.value().col(0).asDiagonal() * g);
    if (t.requires_grad(s)) t.accumulate(s, g.cwiseProduct(x.value()).rowwise().sum());
  });
}

Var col_sum(Var x) {
  return tape_of(x).record(x.value().colwise().sum(), {x}, [x](Tape& t, const Matrix& g, const Matrix&) {
    t.accumulate(x, g.replicate(x.rows(), 1));
  });
}

Var row_dot(Var a, Var b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "row_dot: shape mismatch");
  return tape_of(a).record(a.value().cwiseProduct(b.value()).rowwise().sum(), {a, b},
                           [a, b](Tape& t, const Matrix& g, const Matrix&) {
                             t.accumulate(a, g.col(0).asDiagonal() * b.value());
                             t.accumulate(b, g.col(0).asDiagonal() * a.value());
                           });
}

Var l2_normalize_rows(Var x, int* zero_rows) {
  const Matrix& v = x.value();
  Vector norms = v.rowwise().norm();
  Matrix y = Matrix::Zero(v.rows(), v.cols());
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    if (norms[i] > 0.0) {
      y.row(i) = v.row(i) / norms[i];
    } else if (zero_rows != nullptr) {
      ++*zero_rows;
    }
  }
  return tape_of(x).record(std::move(y), {x}, [x, norms](Tape& t, const Matrix& g, const Matrix& y) {
    Matrix gx = Matrix::Zero(y.rows(), y.cols());
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      if (norms[i] <= 0.0) continue;
      gx.row(i) = (g.row(i) - y.row(i) * y.row(i).dot(g.row(i))) / norms[i];
    }
    t.accumulate(x, gx);
  });
}

Var logsumexp_rows(Var x) {
  const Matrix& v = x.value();
  Matrix y(v.rows(), 1);
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    const double mx = v.row(i).maxCoeff();
    y(i, 0) = mx + std::log((v.row(i).array() - mx).exp().sum());
  }
  return tape_of(x).record(std::move(y), {x}, [x](Tape& t, const Matrix& g, const Matrix& y) {
    const Matrix& v = x.value();
    Matrix gx(v.rows(), v.cols());
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
      gx.row(i) = g(i, 0) * (v.row(i).array() - y(i, 0)).exp().matrix();
    }
    t.accumulate(x, gx);
  });
}

Var softmax_rows(Var x) {
  const Matrix& v = x.value();
  Matrix y(v.rows(), v.cols());
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    y.row(i) = (v.row(i).array() - v.row(i).maxCoeff()).exp().matrix();
    y.row(i) /= y.row(i).sum();
  }
  return tape_of(x).record(std::move(y), {x}, [x](Tape& t, const Matrix& g, const Matrix& y) {
    Matrix gx(y.rows(), y.cols());
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      const double dot = g.row(i).dot(y.row(i));
      gx.row(i) = y.row(i).cwiseProduct((g.row(i).array() - dot).matrix());
    }
    t.accumulate(x, gx);
  });
}

Var column(Var x, Eigen::Index j) {
  require(j >= 0 && j < x.cols(), "column: index out of range");
  Matrix y = x.value().col(j);
  return tape_of(x).record(std::move(y), {x}, [x, j](Tape& t, const Matrix& g, const Matrix&) {
    if (!t.requires_grad(x)) return;
    t.grad_buffer(x).col(j) += g.col(0);
  });
}

Var diagonal(Var x) {
  require(x.rows() == x.cols(), "diagonal: square matrix expected");
  Matrix y = x.value().diagonal();
  return tape_of(x).record(std::move(y), {x}, [x](Tape& t, const Matrix& g, const Matrix&) {
    Matrix gx = Matrix::Zero(x.rows(), x.cols());
    gx.diagonal() = g.col(0);
    t.accumulate(x, gx);
  });
}

Var gather_rows(Var x, std::span<const NodeId> rows) {
  const Matrix& v = x.value();
  Matrix y(static_cast<Eigen::Index>(rows.size()), v.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    require(rows[k] >= 0 && rows[k] < v.rows(), "gather_rows: row out of range");
    y.row(static_cast<Eigen::Index>(k)) = v.row(rows[k]);
  }
  std::vector<NodeId> idx(rows.begin(), rows.end());
  return tape_of(x).record(std::move(y), {x}, [x, idx = std::move(idx)](Tape& t, const Matrix& g, const Matrix&) {
    if (!t.requires_grad(x)) return;
    Matrix& gx = t.grad_buffer(x);
    for (std::size_t k = 0; k < idx.size(); ++k) gx.row(idx[k]) += g.row(static_cast<Eigen::Index>(k));
  });
}

Var concat_cols(std::span<const Var> parts) {
  require(!parts.empty(), "concat_cols: no parts");
  const auto rows = parts[0].rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    require(p.rows() == rows, "concat_cols: row count mismatch");
    cols += p.cols();
  }
  Matrix y(rows, cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    y.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return tape_of(parts[0]).record(std::move(y), inputs, [inputs](Tape& t, const Matrix& g, const Matrix&) {
    Eigen::Index at = 0;
    for (const auto& p : inputs) {
      t.accumulate(p, g.middleCols(at, p.cols()));
      at += p.cols();
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  require(!parts.empty(), "concat_rows: no parts");
  const auto cols = parts[0].cols();
  Eigen::Index rows = 0;
  for (const auto& p : parts) {
    require(p.cols() == cols, "concat_rows: column count mismatch");
    rows += p.rows();
  }
  Matrix y(rows, cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    y.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return tape_of(parts[0]).record(std::move(y), inputs, [inputs](Tape& t, const Matrix& g, const Matrix&) {
    Eigen::Index at = 0;
    for (const auto& p : inputs) {
      t.accumulate(p, g.middleRows(at, p.rows()));
      at += p.rows();
    }
  });
}

Var broadcast(Var s, Eigen::Index rows, Eigen::Index cols) {
  require(s.rows() == 1 && s.cols() == 1, "broadcast: 1x1 input expected");
  return tape_of(s).record(Matrix::Constant(rows, cols, s.scalar()), {s}, [s](Tape& t, const Matrix& g, const Matrix&) {
    t.accumulate(s, Matrix::Constant(1, 1, g.sum()));
  });
}

Var sum(Var x) {
  return tape_of(x).record(Matrix::Constant(1, 1, x.value().sum()), {x}, [x](Tape& t, const Matrix& g, const Matrix&) {
    t.accumulate(x, Matrix::Constant(x.rows(), x.cols(), g(0, 0)));
  });
}

Var mean(Var x) {
  const auto n = static_cast<double>(x.value().size());
  require(n > 0, "mean: empty input");
  return tape_of(x).record(Matrix::Constant(1, 1, x.value().sum() / n), {x},
                           [x, n](Tape& t, const Matrix& g, const Matrix&) {
                             t.accumulate(x, Matrix::Constant(x.rows(), x.cols(), g(0, 0) / n));
                           });
}

Var sum_squares(Var x) {
  return tape_of(x).record(Matrix::Constant(1, 1, x.value().squaredNorm()), {x},
                           [x](Tape& t, const Matrix& g, const Matrix&) {
                             t.accumulate(x, 2.0 * g(0, 0) * x.value());
                           });
}

}  // namespace dcmgnn::ad
