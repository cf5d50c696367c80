#pragma once

#include <span>

#include "memiml/numgrad/tape.hpp"
#include "memiml/numgrad/tensor.hpp"

namespace memiml::numgrad {

// Tape-free kernels. Every recorded op computes its forward value with these.
namespace kernels {
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor add_bias(const Tensor& a, const Tensor& bias);
Tensor scale(const Tensor& a, double c);
Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor softmax(const Tensor& a);
double squared_l2(const Tensor& a);
}  // namespace kernels

// Differentiable ops. All operands must live on the same tape. Matrices are
// at most rank 2; rank-1 operands act as 1 x n rows.

Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);

// Elementwise, identical shapes.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
// Elementwise; either side may also be a single element broadcast over the other.
Var mul(const Var& a, const Var& b);

// a (m x n) plus a length-n bias added to every row.
Var add_bias(const Var& a, const Var& bias);
Var scale(const Var& a, double c);

Var tanh(const Var& a);
Var relu(const Var& a);
Var log(const Var& a);
Var reciprocal(const Var& a);

// Row-wise softmax.
Var softmax(const Var& a);

Var reshape(const Var& a, Shape shape);
Var sum_all(const Var& a);
Var mean_all(const Var& a);
// m x n -> 1 x n
Var sum_rows(const Var& a);
// 1 x n -> m x n
Var broadcast_rows(const Var& a, std::size_t rows);

Var concat_cols(std::span<const Var> parts);
Var concat_cols(const Var& a, const Var& b);
Var slice_cols(const Var& a, std::size_t start, std::size_t width);

// Losses; each returns a 1 x 1 node.

// Mean over rows of the cross-entropy between softmax(logits) and `targets`
// (rows of class probabilities, typically one-hot). Stable log-sum-exp form.
Var softmax_cross_entropy(const Var& logits, const Var& targets);
// Mean over rows of -sum(targets * log(probs)) for already normalized probs.
Var cross_entropy(const Var& probs, const Var& targets);
// Mean over all elements of (a - b)^2.
Var mse(const Var& a, const Var& b);
// Sum of squares.
Var squared_l2(const Var& a);

}  // namespace memiml::numgrad
