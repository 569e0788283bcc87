#include "doctest.h"
#include "dcmgnn/parallel.hpp"
#include "dcmgnn/sparse.hpp"
#include "support/fixtures.hpp"

using dcmgnn::Csr;
using dcmgnn::Matrix;

namespace {

Csr sample() {
  return Csr::from_pairs(4, 4, {{0, 1}, {1, 0}, {1, 2}, {2, 1}, {3, 3}, {1, 2}});
}

}  // namespace

TEST_CASE("from_pairs sorts and collapses duplicates") {
  const Csr a = sample();
  CHECK(a.nnz() == 5);
  CHECK(a.row_ptr == std::vector<std::int64_t>{0, 1, 3, 4, 5});
  CHECK(a.col == std::vector<dcmgnn::NodeId>{1, 0, 2, 1, 3});
  CHECK(a.find(1, 2) == 2);
  CHECK(a.find(0, 0) == -1);
  CHECK(a.entry_rows() == std::vector<dcmgnn::NodeId>{0, 1, 1, 2, 3});
}

TEST_CASE("from_pairs rejects out-of-range indices") {
  CHECK_THROWS(Csr::from_pairs(2, 2, {{0, 2}}));
  CHECK_THROWS(Csr::from_pairs(2, 2, {{-1, 0}}));
}

TEST_CASE("transpose positions map each entry to its mirror") {
  const Csr a = sample();
  const auto t = a.transpose_positions();
  const auto rows = a.entry_rows();
  for (std::size_t k = 0; k < a.nnz(); ++k) {
    const auto m = static_cast<std::size_t>(t[k]);
    CHECK(rows[m] == a.col[k]);
    CHECK(a.col[m] == rows[k]);
  }
}

TEST_CASE("spmm matches the dense product") {
  const Csr a = sample();
  const std::vector<double> values{0.5, -1.0, 2.0, 3.0, 0.25};
  Csr weighted = a;
  weighted.values = values;
  const Matrix x = testing::random_matrix(4, 3, 7);
  const Matrix dense = weighted.to_dense();
  CHECK((dcmgnn::spmm(weighted, x) - dense * x).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((dcmgnn::spmm(a, values, x) - dense * x).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((dcmgnn::spmm_transposed(a, values, x) - dense.transpose() * x).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((dcmgnn::spmm(a, x) - a.to_dense() * x).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("spmm is identical across worker counts") {
  const auto g = testing::random_graph(30, 40, 1, 0.2, 3);
  const Matrix x = testing::random_matrix(70, 5, 11);
  dcmgnn::set_num_workers(1);
  const Matrix one = dcmgnn::spmm(g.adjacency(0), x);
  dcmgnn::set_num_workers(4);
  const Matrix four = dcmgnn::spmm(g.adjacency(0), x);
  dcmgnn::set_num_workers(1);
  CHECK(one == four);
}

TEST_CASE("symmetric normalization leaves zero-degree rows at zero") {
  const Csr a = Csr::from_pairs(3, 3, {{0, 1}, {1, 0}});
  const auto v = dcmgnn::symmetric_normalize(a, {});
  CHECK(v == std::vector<double>{1.0, 1.0});
  const auto sums = dcmgnn::row_sums(a, {});
  CHECK(sums(2) == 0.0);

  const Csr star = Csr::from_pairs(5, 5, {{0, 1}, {0, 2}, {0, 3}, {0, 4}, {1, 0}, {2, 0}, {3, 0}, {4, 0}});
  for (const double x : dcmgnn::symmetric_normalize(star, {})) CHECK(x == doctest::Approx(0.5).epsilon(1e-15));
}
