#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace dcmgnn {

using NodeId = std::int32_t;

// Embedding tables are stored row-major so that one node is one contiguous row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text (interaction files, saved graphs, checkpoints).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Relation names or schema structure that do not line up.
class SchemaError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// A NaN or infinity surfaced during optimization.
class NumericError : public Error {
 public:
  using Error::Error;
};

void require_same_shape(const Matrix& a, const Matrix& b, const char* what);

}  // namespace dcmgnn
