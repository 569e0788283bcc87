#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "dcmgnn/common.hpp"

namespace dcmgnn {

// Compressed sparse row matrix. Column indices are sorted within each row and
// unique. `values` may be empty, in which case every stored entry is 1.
struct Csr {
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  std::vector<std::int64_t> row_ptr{0};
  std::vector<NodeId> col;
  std::vector<double> values;

  std::size_t nnz() const { return col.size(); }
  double value(std::size_t k) const { return values.empty() ? 1.0 : values[k]; }

  // Builds the pattern from (row, col) pairs; duplicates collapse into one entry.
  static Csr from_pairs(std::int64_t rows, std::int64_t cols,
                        std::vector<std::pair<NodeId, NodeId>> pairs);

  // Row index of every stored entry, in storage order.
  std::vector<NodeId> entry_rows() const;
  // Storage position of (r, c), or -1.
  std::int64_t find(NodeId r, NodeId c) const;
  // Storage position of the transposed entry for every entry. Requires a
  // structurally symmetric matrix.
  std::vector<std::int64_t> transpose_positions() const;

  Matrix to_dense() const;
};

// y = A x using the stored values (or `values` when provided, one per entry).
Matrix spmm(const Csr& a, const Matrix& x);
Matrix spmm(const Csr& a, std::span<const double> values, const Matrix& x);
// y = A^T x.
Matrix spmm_transposed(const Csr& a, std::span<const double> values, const Matrix& x);

// Row sums of A. An empty `values` span means the stored entries, here and below.
Vector row_sums(const Csr& a, std::span<const double> values);

// Symmetric degree normalization D^{-1/2} A D^{-1/2} with D from the row sums
// of `values`. Rows with zero degree stay zero.
std::vector<double> symmetric_normalize(const Csr& a, std::span<const double> values);

}  // namespace dcmgnn
