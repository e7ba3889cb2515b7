#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hypercaps/numerics/tape.hpp"
#include "hypercaps/numerics/tensor.hpp"

// Differentiable operations recorded on a Tape. Shape mismatches throw
// DimensionError naming the offending shapes.
namespace hypercaps::numerics {

template <typename T> Var<T> matmul(Var<T> a, Var<T> b);
// a · bᵀ for a [m×k], b [n×k].
template <typename T> Var<T> matmul_nt(Var<T> a, Var<T> b);

template <typename T> Var<T> add(Var<T> a, Var<T> b);
template <typename T> Var<T> sub(Var<T> a, Var<T> b);
template <typename T> Var<T> elementwise_mul(Var<T> a, Var<T> b);
// scale * a + shift with constant coefficients.
template <typename T> Var<T> affine(Var<T> a, T scale, T shift);
// a * s, s holding a single value.
template <typename T> Var<T> scale_by(Var<T> a, Var<T> s);
// a + s, s holding a single value.
template <typename T> Var<T> shift_by(Var<T> a, Var<T> s);

template <typename T> Var<T> sigmoid(Var<T> x);
template <typename T> Var<T> tanh(Var<T> x);
template <typename T> Var<T> relu(Var<T> x);
template <typename T> Var<T> square(Var<T> x);

template <typename T> Var<T> sum(Var<T> x);
template <typename T> Var<T> dot(Var<T> a, Var<T> b);
// Euclidean norm; the gradient at the zero vector is zero.
template <typename T> Var<T> l2_norm(Var<T> x);
// Max-subtracted softmax along `axis`.
template <typename T> Var<T> softmax(Var<T> x, std::size_t axis);

template <typename T> Var<T> concat(Var<T> a, Var<T> b, std::size_t axis);
template <typename T> Var<T> slice(Var<T> x, std::size_t axis, std::size_t begin, std::size_t end);
// Single value at flat index, shape {1}.
template <typename T> Var<T> element(Var<T> x, std::size_t index);
// Stacks k inputs of n values each into [k×n].
template <typename T> Var<T> stack_rows(std::span<const Var<T>> rows);
// Packs single-value inputs into a tensor of the given shape.
template <typename T> Var<T> pack(std::span<const Var<T>> scalars, Shape shape);
// Rows of a rank-2 table selected by index, shape [ids×cols].
template <typename T> Var<T> gather_rows(Var<T> table, std::span<const std::size_t> ids);

// Plain (non-recorded) helpers.
template <typename T>
Tensor<T> softmax_values(const Tensor<T>& x, std::size_t axis);

}  // namespace hypercaps::numerics
