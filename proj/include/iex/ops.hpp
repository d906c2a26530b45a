#pragma once

#include <vector>

#include "iex/tensor.hpp"

namespace iex {

// Differentiable layer primitives. Spatial tensors are (C,H,W) or batched
// (B,C,H,W); vectors are (n) or (B,n). All convolutions are "valid" (no
// padding) with square kernels. Forward functions are pure; *_backward
// functions accumulate into the LayerParams gradient tensors (+=) and return
// the gradient w.r.t. the op input.

// weights (Cout,Cin,k,k), bias (Cout); out spatial dim = (in - k)/stride + 1 (floor).
Tensor conv2d(const Tensor& x, const LayerParams& p, int stride);
Tensor conv2d_backward(const Tensor& x, LayerParams& p, int stride, const Tensor& gy,
                       bool need_gx = true);

// Transposed convolution, the exact adjoint of conv2d: weights (Cin,Cout,k,k).
// out_h/out_w select which conv input geometry is being inverted; they must
// lie in [(in-1)*stride + k, (in-1)*stride + k + stride - 1]. Defaults to the
// low end. Cells no conv window touches receive bias only.
Tensor deconv2d(const Tensor& x, const LayerParams& p, int stride, int out_h = -1,
                int out_w = -1);
Tensor deconv2d_backward(const Tensor& x, LayerParams& p, int stride, const Tensor& gy);

Tensor relu(const Tensor& x);
Tensor relu_backward(const Tensor& x, const Tensor& gy);

Tensor sigmoid(const Tensor& x);
// Takes the forward *output* y (sigmoid'(x) = y(1-y)).
Tensor sigmoid_backward(const Tensor& y, const Tensor& gy);

// 2x2 non-overlapping max pooling; spatial dims must be even. The cached
// argmax routes the backward pass to the first maximal element of each window
// in row-major scan order.
Tensor maxpool2(const Tensor& x);
Tensor maxpool2(const Tensor& x, std::vector<Eigen::Index>& argmax);
Tensor maxpool2_backward(const std::vector<Eigen::Index>& argmax,
                         const std::vector<int>& x_shape, const Tensor& gy);

// weights (out,in), bias (out); y = W x + b.
Tensor dense(const Tensor& x, const LayerParams& p);
Tensor dense_backward(const Tensor& x, LayerParams& p, const Tensor& gy);

// Joint state/action feature: (Ws hs) ⊙ (Wa a). The action rows must be
// exactly one-hot. ws/wa carry no bias (empty b tensors).
struct FusionCache {
  Tensor u;  // Ws hs
  Tensor v;  // Wa a
};
Tensor multiplicative_fusion(const Tensor& hs, const Tensor& a, const LayerParams& ws,
                             const LayerParams& wa, FusionCache* cache = nullptr);
// Returns grad w.r.t. hs (the action input is data, not differentiated).
Tensor multiplicative_fusion_backward(const Tensor& hs, const Tensor& a, LayerParams& ws,
                                      LayerParams& wa, const FusionCache& cache,
                                      const Tensor& gy);

}  // namespace iex
