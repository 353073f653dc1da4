#pragma once

#include <cstddef>
#include <vector>

#include "viewgrid/tape.hpp"

namespace viewgrid::ops {

// ---- elementwise ----
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var neg(Var a);
Var tanh(Var a);
Var relu(Var a);
Var exp(Var a);
Var square(Var a);

// ---- reductions ----
Var sum(Var a);   // scalar
Var mean(Var a);  // scalar

// ---- shape ----
Var reshape(Var a, std::vector<std::size_t> shape);
Var concat0(const std::vector<Var>& parts);  // along axis 0
Var at(Var a, std::size_t flat_index);       // scalar pick
Var stack_scalars(const std::vector<Var>& xs);  // k scalars -> [k]
// [..., L] -> [..., to-from], half-open column range on the last axis.
Var slice_lastdim(Var a, std::size_t from, std::size_t to);
// [C,H,W] -> [W,H,C] (feature-map packing order).
Var chw_to_whc(Var a);

// ---- linear algebra ----
Var matmul(Var a, Var b);     // [m,k]x[k,n] -> [m,n]
Var matmul_nt(Var a, Var b);  // a * b^T: [m,k]x[n,k] -> [m,n]
Var affine(Var x, Var w, Var b);  // [n] -> [m] via w[m,n], b[m]
Var sub_row(Var rows, Var row);   // rows[n,k] - row[k] broadcast

// ---- neural network ----
// Channel-major images: x[Cin,H,W], w[Cout,Cin,kh,kw], b[Cout]; zero padding
// keeps `same` geometry before the stride is applied.
Var conv2d(Var x, Var w, Var b, std::size_t stride, std::size_t pad);
// Volumes: x[Cin,D,H,W], w[Cout,Cin,kd,kh,kw], b[Cout].
Var conv3d(Var x, Var w, Var b, std::size_t stride, std::size_t pad);
Var channel_mean(Var x);  // [C,...spatial...] -> [C]
// v / sqrt(sum(v^2) + eps); keeps pooled features at unit scale so heads see
// O(1) inputs regardless of upstream sparsity.
Var l2_normalize(Var v, double eps = 1e-8);

// ---- losses ----
// Softmax + negative log-likelihood, stabilized by max subtraction.
Var cross_entropy(Var logits, std::size_t label);
// Frobenius norm of (a-b); subgradient 0 at a==b.
Var frobenius_diff(Var a, Var b);

}  // namespace viewgrid::ops
