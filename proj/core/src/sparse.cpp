#include "dcmgnn/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dcmgnn/parallel.hpp"

namespace dcmgnn {

Csr Csr::from_pairs(std::int64_t rows, std::int64_t cols,
                    std::vector<std::pair<NodeId, NodeId>> pairs) {
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  Csr m;
  m.rows = rows;
  m.cols = cols;
  m.row_ptr.assign(static_cast<std::size_t>(rows) + 1, 0);
  m.col.reserve(pairs.size());
  for (const auto& [r, c] : pairs) {
    if (r < 0 || r >= rows || c < 0 || c >= cols) {
      throw ShapeError("Csr::from_pairs: entry out of range");
    }
    ++m.row_ptr[static_cast<std::size_t>(r) + 1];
    m.col.push_back(c);
  }
  for (std::size_t i = 1; i < m.row_ptr.size(); ++i) m.row_ptr[i] += m.row_ptr[i - 1];
  return m;
}

std::vector<NodeId> Csr::entry_rows() const {
  std::vector<NodeId> out(nnz());
  for (std::int64_t r = 0; r < rows; ++r) {
    for (auto k = row_ptr[r]; k < row_ptr[r + 1]; ++k) out[k] = static_cast<NodeId>(r);
  }
  return out;
}

std::int64_t Csr::find(NodeId r, NodeId c) const {
  const auto first = col.begin() + row_ptr[r];
  const auto last = col.begin() + row_ptr[r + 1];
  const auto it = std::lower_bound(first, last, c);
  if (it == last || *it != c) return -1;
  return it - col.begin();
}

std::vector<std::int64_t> Csr::transpose_positions() const {
  std::vector<std::int64_t> out(nnz());
  for (std::int64_t r = 0; r < rows; ++r) {
    for (auto k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
      const auto t = find(col[k], static_cast<NodeId>(r));
      if (t < 0) throw ShapeError("Csr::transpose_positions: matrix is not structurally symmetric");
      out[k] = t;
    }
  }
  return out;
}

Matrix Csr::to_dense() const {
  Matrix d = Matrix::Zero(rows, cols);
  for (std::int64_t r = 0; r < rows; ++r) {
    for (auto k = row_ptr[r]; k < row_ptr[r + 1]; ++k) d(r, col[k]) += value(k);
  }
  return d;
}

namespace {

// Entry k of `values`, or the matrix's own entry when `values` is empty.
inline double entry(const Csr& a, std::span<const double> values, std::int64_t k) {
  return values.empty() ? a.value(static_cast<std::size_t>(k)) : values[static_cast<std::size_t>(k)];
}

void check_values(const Csr& a, std::span<const double> values, const char* op) {
  if (!values.empty() && values.size() != a.nnz()) {
    throw ShapeError(std::string(op) + ": value count does not match pattern");
  }
}

}  // namespace

Matrix spmm(const Csr& a, const Matrix& x) { return spmm(a, {}, x); }

Matrix spmm(const Csr& a, std::span<const double> values, const Matrix& x) {
  if (x.rows() != a.cols) throw ShapeError("spmm: inner dimension mismatch");
  check_values(a, values, "spmm");
  Matrix y = Matrix::Zero(a.rows, x.cols());
  parallel_for(static_cast<std::size_t>(a.rows), [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      for (auto k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k) {
        y.row(static_cast<Eigen::Index>(r)) += entry(a, values, k) * x.row(a.col[k]);
      }
    }
  });
  return y;
}

Matrix spmm_transposed(const Csr& a, std::span<const double> values, const Matrix& x) {
  if (x.rows() != a.rows) throw ShapeError("spmm_transposed: inner dimension mismatch");
  check_values(a, values, "spmm_transposed");
  // Scatter form; kept serial so the accumulation order is fixed.
  Matrix y = Matrix::Zero(a.cols, x.cols());
  for (std::int64_t r = 0; r < a.rows; ++r) {
    for (auto k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k) {
      y.row(a.col[k]) += entry(a, values, k) * x.row(r);
    }
  }
  return y;
}

Vector row_sums(const Csr& a, std::span<const double> values) {
  check_values(a, values, "row_sums");
  Vector s = Vector::Zero(a.rows);
  for (std::int64_t r = 0; r < a.rows; ++r) {
    for (auto k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k) s[r] += entry(a, values, k);
  }
  return s;
}

std::vector<double> symmetric_normalize(const Csr& a, std::span<const double> values) {
  const Vector deg = row_sums(a, values);
  std::vector<double> out(a.nnz(), 0.0);
  for (std::int64_t r = 0; r < a.rows; ++r) {
    for (auto k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k) {
      const double dr = deg[r];
      const double dc = deg[a.col[k]];
      if (dr > 0.0 && dc > 0.0) out[k] = entry(a, values, k) / std::sqrt(dr * dc);
    }
  }
  return out;
}

}  // namespace dcmgnn
