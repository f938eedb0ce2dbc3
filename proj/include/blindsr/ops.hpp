#pragma once

#include "blindsr/tensor.hpp"

// Differentiable operations recorded on a Tape. Every input Var must live on
// the same tape; the result is appended to that tape.
namespace blindsr {

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var a, double factor);
// Elementwise product with a constant (non-differentiated) tensor of equal shape.
Var multiply(Var a, const Tensor& mask);
Var reshape(Var a, Shape shape);

Var sum(Var a);
// Squared Frobenius norm, sum of a_i^2.
Var sum_squares(Var a);
// mean |a - target|; subgradient 0 where they coincide.
Var l1_loss(Var a, const Tensor& target);

// [m x k] x [k x n] -> [m x n].
Var matmul(Var a, Var b);
Var transpose(Var a);
// [m x n] -> [1 x n], sum over rows.
Var column_sum(Var a);
Var column_mean(Var a);

// Same-padding cross-correlation. input [Cin x H x W], weights [Cout x Cin x k x k],
// bias [Cout]; padding must equal (k - 1) / 2.
Var conv2d(Var input, Var weights, Var bias, Index padding);
Var leaky_relu(Var input, double slope);
// [C x H x W] -> [C x fH x fW], each pixel replicated into an f x f block.
Var upsample_nearest(Var input, Index factor);

// [C x H x W] -> [N x C] with N = H * W rows (spatial positions).
Var feature_matrix(Var features);

}  // namespace blindsr
