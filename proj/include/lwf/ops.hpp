#pragma once

#include <vector>

#include "lwf/tensor.hpp"

namespace lwf {

// Elementwise and structural ops. All inputs are dense row-major doubles;
// the only broadcast supported is the last-dim bias in add_bias.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);

// a: [..., C], bias: [C]; adds bias along the last dimension.
Tensor add_bias(const Tensor& a, const Tensor& bias);

Tensor matmul(const Tensor& a, const Tensor& b);  // [m,k] x [k,n]
Tensor transpose(const Tensor& a);                // [m,n] -> [n,m]
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor reshape(const Tensor& a, std::vector<int> new_shape);
Tensor sum_all(const Tensor& a);  // -> scalar

Tensor relu(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);

// Row gather: table [W,d], ids in [0,W) -> [len(ids), d].
Tensor embed_rows(const Tensor& table, const std::vector<int>& ids);

// Last-dim layer normalization over a [T,C] tensor.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);

// Length-preserving 1-D convolution over time. x: [T,Cin],
// w: [Cout,Cin,K], b: [Cout]; zero padding of (K-1)*dilation/2 each side.
Tensor conv1d_same(const Tensor& x, const Tensor& w, const Tensor& b, int dilation = 1);

// Length-preserving per-channel 2-D convolution over the time-frequency
// plane. x: [T,F,C], w: [C,Kt,Kf], b: [C]; odd kernels, zero padding.
Tensor depthwise_conv2d_same(const Tensor& x, const Tensor& w, const Tensor& b);

}  // namespace lwf
