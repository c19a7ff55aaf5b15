// include/ulid/nn.h

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

#ifndef ULID_NN_H_
#define ULID_NN_H_

#include <string>
#include <vector>

#include "ulid/ops.h"
#include "ulid/rng.h"
#include "ulid/tensor.h"

namespace ulid {

// Named tensor owned by a layer. trainable selects optimizer updates;
// decay selects L2 weight decay (normalization scale/shift and dictionary
// scales are exempt). Non-trainable entries (running statistics) still go
// into checkpoints.
template <typename T>
struct TensorEntry {
  std::string name;
  TensorPtrT<T> value;
  bool trainable = true;
  bool decay = true;
};

template <typename T>
using TensorEntries = std::vector<TensorEntry<T>>;

template <typename T>
struct Conv2dLayer {
  TensorPtrT<T> w, b;
  Conv2dGeom geom;

  void init(int64_t cout, int64_t cin, int64_t kh, int64_t kw, int64_t sh,
            int64_t sw, int64_t ph, int64_t pw, Rng& rng);
  TensorPtrT<T> forward(TapeT<T>* tape, const TensorPtrT<T>& x) const {
    return conv2d(tape, x, w, b, geom);
  }
  void collect(const std::string& prefix, TensorEntries<T>* out);
};

template <typename T>
struct BatchNormLayer {
  TensorPtrT<T> gamma, beta, run_mean, run_var;
  double momentum = 0.9;
  double eps = 1e-5;

  void init(int64_t channels);
  TensorPtrT<T> forward(TapeT<T>* tape, const TensorPtrT<T>& x,
                        bool training) const {
    return batchnorm(tape, x, gamma, beta, run_mean, run_var, training,
                     momentum, eps);
  }
  void collect(const std::string& prefix, TensorEntries<T>* out);
};

template <typename T>
struct LinearLayer {
  TensorPtrT<T> w;  // [in, out]
  TensorPtrT<T> b;  // [out]

  void init(int64_t in, int64_t out, double weight_std, Rng& rng);
  TensorPtrT<T> forward(TapeT<T>* tape, const TensorPtrT<T>& x) const {
    return add(tape, matmul(tape, x, w), b);
  }
  void collect(const std::string& prefix, TensorEntries<T>* out);
};

// conv-norm-relu-conv-norm plus identity or 1x1 projection shortcut, then
// relu. The first conv carries the block's stride.
template <typename T>
struct ResidualBlock {
  Conv2dLayer<T> conv1, conv2;
  BatchNormLayer<T> bn1, bn2;
  bool has_proj = false;
  Conv2dLayer<T> proj;
  BatchNormLayer<T> bnp;

  void init(int64_t cin, int64_t cout, int64_t kh, int64_t kw, int64_t sh,
            int64_t sw, int64_t ph, int64_t pw, Rng& rng);
  TensorPtrT<T> forward(TapeT<T>* tape, const TensorPtrT<T>& x,
                        bool training) const;
  void collect(const std::string& prefix, TensorEntries<T>* out);
};

// Single forward-direction gated recurrent layer:
//   z = sigmoid(Wxz x + Whz h + bz)
//   r = sigmoid(Wxr x + Whr h + br)
//   c = tanh(Wxc x + Whc (r . h) + bc)   (reset gates the state before Whc)
//   h' = (1 - z) . h + z . c
template <typename T>
struct GruLayer {
  TensorPtrT<T> wxz, whz, bz, wxr, whr, br, wxc, whc, bc;
  int64_t hidden = 0;

  void init(int64_t d_in, int64_t hidden_dim, Rng& rng);
  TensorPtrT<T> step(TapeT<T>* tape, const TensorPtrT<T>& x_t,
                     const TensorPtrT<T>& h) const;
  void collect(const std::string& prefix, TensorEntries<T>* out);
};

// Single forward-direction LSTM layer with forget bias initialized to 1.
template <typename T>
struct LstmLayer {
  TensorPtrT<T> wxi, whi, bi, wxf, whf, bf, wxg, whg, bg, wxo, who, bo;
  int64_t hidden = 0;

  void init(int64_t d_in, int64_t hidden_dim, Rng& rng);
  // Returns (h', c').
  std::pair<TensorPtrT<T>, TensorPtrT<T>> step(TapeT<T>* tape,
                                               const TensorPtrT<T>& x_t,
                                               const TensorPtrT<T>& h,
                                               const TensorPtrT<T>& c) const;
  void collect(const std::string& prefix, TensorEntries<T>* out);
};

// Dictionary components and positive scales for lde_encode. Scales are
// stored pre-softplus so positivity cannot be violated by updates.
template <typename T>
struct LdeLayer {
  TensorPtrT<T> mu;    // [C, D]
  TensorPtrT<T> shat;  // [C]
  bool mass_norm = false;

  void init(int64_t comps, int64_t dim, Rng& rng);
  TensorPtrT<T> forward(TapeT<T>* tape, const TensorPtrT<T>& x) const {
    return lde_encode(tape, x, mu, shat, mass_norm);
  }
  void collect(const std::string& prefix, TensorEntries<T>* out);
};

}  // namespace ulid

#endif  // ULID_NN_H_
