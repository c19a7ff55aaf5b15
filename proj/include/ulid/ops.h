// include/ulid/ops.h

// Copyright 2026  The ulid Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef ULID_OPS_H_
#define ULID_OPS_H_

#include <vector>

#include "ulid/tensor.h"

namespace ulid {

// Every op appends its backward rule to the tape (when non-null and at least
// one input requires a gradient) and propagates requires_grad to its output.
// Passing tape == nullptr gives a plain forward evaluation.

struct Conv2dGeom {
  int64_t kh = 1, kw = 1;
  int64_t sh = 1, sw = 1;
  int64_t ph = 0, pw = 0;
};

// a[m x k] * b[k x n] -> [m x n].  dA = dC * B^T, dB = A^T * dC.
template <typename T>
TensorPtrT<T> matmul(TapeT<T>* tape, const TensorPtrT<T>& a,
                     const TensorPtrT<T>& b);

// Cross-correlation (no kernel flip) with per-output-channel bias added after
// the accumulation. x is [Cin,H,W] or [B,Cin,H,W]; w is [Cout,Cin,kh,kw];
// bias is [Cout] or null. Accumulation order per output element is
// (cin, kh, kw) ascending with zero contributions from padding, matching a
// direct six-loop reference bit for bit in either precision.
template <typename T>
TensorPtrT<T> conv2d(TapeT<T>* tape, const TensorPtrT<T>& x,
                     const TensorPtrT<T>& w, const TensorPtrT<T>& bias,
                     const Conv2dGeom& geom);

template <typename T>
TensorPtrT<T> relu(TapeT<T>* tape, const TensorPtrT<T>& x);
template <typename T>
TensorPtrT<T> tanh_op(TapeT<T>* tape, const TensorPtrT<T>& x);
template <typename T>
TensorPtrT<T> sigmoid_op(TapeT<T>* tape, const TensorPtrT<T>& x);
// log rejects non-positive inputs; upstream producers floor their arguments.
template <typename T>
TensorPtrT<T> log_op(TapeT<T>* tape, const TensorPtrT<T>& x);
template <typename T>
TensorPtrT<T> exp_op(TapeT<T>* tape, const TensorPtrT<T>& x);
template <typename T>
TensorPtrT<T> neg_op(TapeT<T>* tape, const TensorPtrT<T>& x);

// Binary elementwise ops. Shapes must match exactly, or b may be a 1-D
// vector whose length equals a's channel axis (axis 1 for rank >= 2),
// broadcast across all remaining axes.
template <typename T>
TensorPtrT<T> add(TapeT<T>* tape, const TensorPtrT<T>& a,
                  const TensorPtrT<T>& b);
template <typename T>
TensorPtrT<T> sub(TapeT<T>* tape, const TensorPtrT<T>& a,
                  const TensorPtrT<T>& b);
template <typename T>
TensorPtrT<T> mul(TapeT<T>* tape, const TensorPtrT<T>& a,
                  const TensorPtrT<T>& b);

// scale * x + shift with compile-time-constant coefficients.
template <typename T>
TensorPtrT<T> affine(TapeT<T>* tape, const TensorPtrT<T>& x, double scale,
                     double shift);

enum class Reduce { kMean, kSum, kMax };

// Removes `axis`. Mean backward spreads 1/N; max routes the gradient to the
// first occurrence of the maximum along the axis.
template <typename T>
TensorPtrT<T> reduce(TapeT<T>* tape, const TensorPtrT<T>& x, int axis,
                     Reduce mode);

// Mean over the batch of -log softmax(logits)[label], stabilized by row-max
// subtraction. logits [N x K]; labels in [0, K). Backward is
// (softmax - onehot) / N.
template <typename T>
TensorPtrT<T> softmax_cross_entropy(TapeT<T>* tape, const TensorPtrT<T>& logits,
                                    const std::vector<int>& labels);

// Per-channel normalization over batch and spatial axes (channel axis 1).
// Training mode normalizes with batch statistics (biased variance) and folds
// them into the running buffers: run = momentum * run + (1 - momentum) * batch.
// Eval mode normalizes with the running buffers.
template <typename T>
TensorPtrT<T> batchnorm(TapeT<T>* tape, const TensorPtrT<T>& x,
                        const TensorPtrT<T>& gamma, const TensorPtrT<T>& beta,
                        const TensorPtrT<T>& run_mean,
                        const TensorPtrT<T>& run_var, bool training,
                        double momentum, double eps);

// Same element count, new shape; data copied, gradient reshaped back.
template <typename T>
TensorPtrT<T> reshape(TapeT<T>* tape, const TensorPtrT<T>& x, Shape shape);

// x [B,D,L] -> column t as [B,D].
template <typename T>
TensorPtrT<T> time_slice(TapeT<T>* tape, const TensorPtrT<T>& x, int64_t t);

// Dictionary encoding of x [B,D,L] against C components mu [C,D] with
// positive scales s = softplus(shat).  Per frame t:
//   r_tc = x_t - mu_c
//   w_tc = softmax_c(-s_c * |r_tc|^2)        (row-max subtracted)
// and per component either
//   e_c = (1/L) * sum_t w_tc * r_tc          (length normalization, default)
//   e_c = sum_t w_tc * r_tc / sum_t w_tc     (mass normalization)
// Output [B, C*D], component-major.
template <typename T>
TensorPtrT<T> lde_encode(TapeT<T>* tape, const TensorPtrT<T>& x,
                         const TensorPtrT<T>& mu, const TensorPtrT<T>& shat,
                         bool mass_norm);

// Row-wise log softmax of a [N x K] matrix, forward only (inference path).
template <typename T>
std::vector<double> log_softmax_row(const TensorT<T>& logits, int64_t row);

}  // namespace ulid

#endif  // ULID_OPS_H_
