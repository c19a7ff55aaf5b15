// src/nn.cc

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

#include "ulid/nn.h"

#include <cmath>

namespace ulid {

namespace {

template <typename T>
TensorPtrT<T> he_normal(Shape shape, int64_t fan_in, Rng& rng) {
  auto t = make_tensor<T>(shape, false);
  const double std = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (int64_t i = 0; i < t->numel(); ++i) {
    t->at(i) = static_cast<T>(rng.normal(0.0, std));
  }
  return t;
}

template <typename T>
TensorPtrT<T> uniform_init(Shape shape, double lim, Rng& rng) {
  auto t = make_tensor<T>(shape, false);
  for (int64_t i = 0; i < t->numel(); ++i) {
    t->at(i) = static_cast<T>(rng.uniform(-lim, lim));
  }
  return t;
}

template <typename T>
TensorPtrT<T> const_init(Shape shape, double v) {
  auto t = make_tensor<T>(shape, false);
  for (int64_t i = 0; i < t->numel(); ++i) t->at(i) = static_cast<T>(v);
  return t;
}

}  // namespace

// ---------------------------------------------------------------------------
// Conv2dLayer

template <typename T>
void Conv2dLayer<T>::init(int64_t cout, int64_t cin, int64_t kh, int64_t kw,
                          int64_t sh, int64_t sw, int64_t ph, int64_t pw,
                          Rng& rng) {
  geom = {kh, kw, sh, sw, ph, pw};
  w = he_normal<T>({cout, cin, kh, kw}, cin * kh * kw, rng);
  b = const_init<T>({cout}, 0.0);
}

template <typename T>
void Conv2dLayer<T>::collect(const std::string& prefix, TensorEntries<T>* out) {
  out->push_back({prefix + ".w", w, true, true});
  out->push_back({prefix + ".b", b, true, true});
}

// ---------------------------------------------------------------------------
// BatchNormLayer

template <typename T>
void BatchNormLayer<T>::init(int64_t channels) {
  gamma = const_init<T>({channels}, 1.0);
  beta = const_init<T>({channels}, 0.0);
  run_mean = const_init<T>({channels}, 0.0);
  run_var = const_init<T>({channels}, 1.0);
}

template <typename T>
void BatchNormLayer<T>::collect(const std::string& prefix,
                                TensorEntries<T>* out) {
  out->push_back({prefix + ".gamma", gamma, true, false});
  out->push_back({prefix + ".beta", beta, true, false});
  out->push_back({prefix + ".run_mean", run_mean, false, false});
  out->push_back({prefix + ".run_var", run_var, false, false});
}

// ---------------------------------------------------------------------------
// LinearLayer

template <typename T>
void LinearLayer<T>::init(int64_t in, int64_t out, double weight_std,
                          Rng& rng) {
  w = make_tensor<T>(Shape{in, out}, false);
  for (int64_t i = 0; i < w->numel(); ++i) {
    w->at(i) = static_cast<T>(rng.normal(0.0, weight_std));
  }
  b = const_init<T>({out}, 0.0);
}

template <typename T>
void LinearLayer<T>::collect(const std::string& prefix, TensorEntries<T>* out) {
  out->push_back({prefix + ".w", w, true, true});
  out->push_back({prefix + ".b", b, true, true});
}

// ---------------------------------------------------------------------------
// ResidualBlock

template <typename T>
void ResidualBlock<T>::init(int64_t cin, int64_t cout, int64_t kh, int64_t kw,
                            int64_t sh, int64_t sw, int64_t ph, int64_t pw,
                            Rng& rng) {
  conv1.init(cout, cin, kh, kw, sh, sw, ph, pw, rng);
  bn1.init(cout);
  conv2.init(cout, cout, kh, kw, 1, 1, ph, pw, rng);
  bn2.init(cout);
  has_proj = cin != cout || sh != 1 || sw != 1;
  if (has_proj) {
    proj.init(cout, cin, 1, 1, sh, sw, 0, 0, rng);
    bnp.init(cout);
  }
}

template <typename T>
TensorPtrT<T> ResidualBlock<T>::forward(TapeT<T>* tape, const TensorPtrT<T>& x,
                                        bool training) const {
  auto y = relu(tape, bn1.forward(tape, conv1.forward(tape, x), training));
  y = bn2.forward(tape, conv2.forward(tape, y), training);
  auto shortcut =
      has_proj ? bnp.forward(tape, proj.forward(tape, x), training) : x;
  return relu(tape, add(tape, y, shortcut));
}

template <typename T>
void ResidualBlock<T>::collect(const std::string& prefix,
                               TensorEntries<T>* out) {
  conv1.collect(prefix + ".conv1", out);
  bn1.collect(prefix + ".bn1", out);
  conv2.collect(prefix + ".conv2", out);
  bn2.collect(prefix + ".bn2", out);
  if (has_proj) {
    proj.collect(prefix + ".proj", out);
    bnp.collect(prefix + ".proj_bn", out);
  }
}

// ---------------------------------------------------------------------------
// GruLayer

template <typename T>
void GruLayer<T>::init(int64_t d_in, int64_t hidden_dim, Rng& rng) {
  hidden = hidden_dim;
  const double lim = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  wxz = uniform_init<T>({d_in, hidden_dim}, lim, rng);
  whz = uniform_init<T>({hidden_dim, hidden_dim}, lim, rng);
  bz = const_init<T>({hidden_dim}, 0.0);
  wxr = uniform_init<T>({d_in, hidden_dim}, lim, rng);
  whr = uniform_init<T>({hidden_dim, hidden_dim}, lim, rng);
  br = const_init<T>({hidden_dim}, 0.0);
  wxc = uniform_init<T>({d_in, hidden_dim}, lim, rng);
  whc = uniform_init<T>({hidden_dim, hidden_dim}, lim, rng);
  bc = const_init<T>({hidden_dim}, 0.0);
}

template <typename T>
TensorPtrT<T> GruLayer<T>::step(TapeT<T>* tape, const TensorPtrT<T>& x_t,
                                const TensorPtrT<T>& h) const {
  auto z = sigmoid_op(
      tape, add(tape, add(tape, matmul(tape, x_t, wxz), matmul(tape, h, whz)),
                bz));
  auto r = sigmoid_op(
      tape, add(tape, add(tape, matmul(tape, x_t, wxr), matmul(tape, h, whr)),
                br));
  auto c = tanh_op(
      tape, add(tape,
                add(tape, matmul(tape, x_t, wxc),
                    matmul(tape, mul(tape, r, h), whc)),
                bc));
  // h' = h - z.h + z.c
  return add(tape, sub(tape, h, mul(tape, z, h)), mul(tape, z, c));
}

template <typename T>
void GruLayer<T>::collect(const std::string& prefix, TensorEntries<T>* out) {
  out->push_back({prefix + ".wxz", wxz, true, true});
  out->push_back({prefix + ".whz", whz, true, true});
  out->push_back({prefix + ".bz", bz, true, true});
  out->push_back({prefix + ".wxr", wxr, true, true});
  out->push_back({prefix + ".whr", whr, true, true});
  out->push_back({prefix + ".br", br, true, true});
  out->push_back({prefix + ".wxc", wxc, true, true});
  out->push_back({prefix + ".whc", whc, true, true});
  out->push_back({prefix + ".bc", bc, true, true});
}

// ---------------------------------------------------------------------------
// LstmLayer

template <typename T>
void LstmLayer<T>::init(int64_t d_in, int64_t hidden_dim, Rng& rng) {
  hidden = hidden_dim;
  const double lim = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  wxi = uniform_init<T>({d_in, hidden_dim}, lim, rng);
  whi = uniform_init<T>({hidden_dim, hidden_dim}, lim, rng);
  bi = const_init<T>({hidden_dim}, 0.0);
  wxf = uniform_init<T>({d_in, hidden_dim}, lim, rng);
  whf = uniform_init<T>({hidden_dim, hidden_dim}, lim, rng);
  bf = const_init<T>({hidden_dim}, 1.0);
  wxg = uniform_init<T>({d_in, hidden_dim}, lim, rng);
  whg = uniform_init<T>({hidden_dim, hidden_dim}, lim, rng);
  bg = const_init<T>({hidden_dim}, 0.0);
  wxo = uniform_init<T>({d_in, hidden_dim}, lim, rng);
  who = uniform_init<T>({hidden_dim, hidden_dim}, lim, rng);
  bo = const_init<T>({hidden_dim}, 0.0);
}

template <typename T>
std::pair<TensorPtrT<T>, TensorPtrT<T>> LstmLayer<T>::step(
    TapeT<T>* tape, const TensorPtrT<T>& x_t, const TensorPtrT<T>& h,
    const TensorPtrT<T>& c) const {
  auto gate = [&](const TensorPtrT<T>& wx, const TensorPtrT<T>& wh,
                  const TensorPtrT<T>& bias) {
    return add(tape,
               add(tape, matmul(tape, x_t, wx), matmul(tape, h, wh)), bias);
  };
  auto i = sigmoid_op(tape, gate(wxi, whi, bi));
  auto f = sigmoid_op(tape, gate(wxf, whf, bf));
  auto g = tanh_op(tape, gate(wxg, whg, bg));
  auto o = sigmoid_op(tape, gate(wxo, who, bo));
  auto c_next = add(tape, mul(tape, f, c), mul(tape, i, g));
  auto h_next = mul(tape, o, tanh_op(tape, c_next));
  return {h_next, c_next};
}

template <typename T>
void LstmLayer<T>::collect(const std::string& prefix, TensorEntries<T>* out) {
  out->push_back({prefix + ".wxi", wxi, true, true});
  out->push_back({prefix + ".whi", whi, true, true});
  out->push_back({prefix + ".bi", bi, true, true});
  out->push_back({prefix + ".wxf", wxf, true, true});
  out->push_back({prefix + ".whf", whf, true, true});
  out->push_back({prefix + ".bf", bf, true, true});
  out->push_back({prefix + ".wxg", wxg, true, true});
  out->push_back({prefix + ".whg", whg, true, true});
  out->push_back({prefix + ".bg", bg, true, true});
  out->push_back({prefix + ".wxo", wxo, true, true});
  out->push_back({prefix + ".who", who, true, true});
  out->push_back({prefix + ".bo", bo, true, true});
}

// ---------------------------------------------------------------------------
// LdeLayer

template <typename T>
void LdeLayer<T>::init(int64_t comps, int64_t dim, Rng& rng) {
  const double lim = 1.0 / std::sqrt(static_cast<double>(comps));
  mu = uniform_init<T>({comps, dim}, lim, rng);
  // softplus(shat) == 1
  shat = const_init<T>({comps}, std::log(std::exp(1.0) - 1.0));
}

template <typename T>
void LdeLayer<T>::collect(const std::string& prefix, TensorEntries<T>* out) {
  out->push_back({prefix + ".mu", mu, true, true});
  out->push_back({prefix + ".shat", shat, true, false});
}

#define ULID_INSTANTIATE_NN(T)      \
  template struct Conv2dLayer<T>;   \
  template struct BatchNormLayer<T>; \
  template struct LinearLayer<T>;   \
  template struct ResidualBlock<T>; \
  template struct GruLayer<T>;      \
  template struct LstmLayer<T>;     \
  template struct LdeLayer<T>;

ULID_INSTANTIATE_NN(float)
ULID_INSTANTIATE_NN(double)

#undef ULID_INSTANTIATE_NN

}  // namespace ulid
