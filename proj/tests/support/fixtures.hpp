#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dcmgnn/graph.hpp"
#include "dcmgnn/model.hpp"
#include "dcmgnn/rng.hpp"

namespace testing {

using dcmgnn::Matrix;

// Relation names r0..r{n-1}, last one is the target.
dcmgnn::RelationSchema numbered_schema(int relations);

// Every (user, item, relation) edge present independently with probability p.
dcmgnn::MultiplexBipartiteGraph random_graph(int users, int items, int relations, double p, std::uint64_t seed);

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed, double scale = 1.0);

// Dense symmetric adjacency of a relation.
Matrix dense_adjacency(const dcmgnn::MultiplexBipartiteGraph& graph, int relation);
// D^{-1/2} A D^{-1/2} with zero-degree rows left zero.
Matrix dense_sym_normalize(const Matrix& a);

// Small graph with three relations where every user has target edges. The
// view&buy and view&cart&buy patterns have edges, cart&buy has none.
dcmgnn::MultiplexBipartiteGraph tiny_graph();

// Hand-built batch over the tiny graph for the given model.
dcmgnn::TrainBatch tiny_batch(const dcmgnn::DcmgnnModel& model);

// Max over coordinates of |a - fd| / max(|a|, |fd|, floor).
double max_relative_error(const Matrix& analytic, const Matrix& numeric, double floor = 1e-6);

// Central finite differences of f over every coordinate of x.
Matrix finite_difference(Matrix& x, const std::function<double()>& f, double h = 1e-4);

std::string temp_dir(const std::string& name);

}  // namespace testing
