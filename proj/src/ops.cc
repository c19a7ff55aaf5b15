// src/ops.cc

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

#include "ulid/ops.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>

#include "ulid/gemm.h"
#include "ulid/parallel.h"

namespace ulid {

namespace {

template <typename T>
bool want_grad(TapeT<T>* tape, std::initializer_list<const TensorPtrT<T>*> ins) {
  if (tape == nullptr) return false;
  for (const auto* p : ins) {
    if (*p != nullptr && (*p)->requires_grad) return true;
  }
  return false;
}

inline int64_t div_up(int64_t a, int64_t b) { return (a + b - 1) / b; }

// Chunked elementwise parallelism; chunks write disjoint ranges.
void for_chunks(int64_t n, const std::function<void(int64_t, int64_t)>& fn) {
  constexpr int64_t kChunk = 1 << 15;
  if (n <= kChunk || num_workers() <= 1) {
    fn(0, n);
    return;
  }
  const int64_t chunks = div_up(n, kChunk);
  parallel_for(chunks, [&](int64_t i) {
    fn(i * kChunk, std::min(n, (i + 1) * kChunk));
  });
}

// Row-block parallel wrapper over gemm_nn; blocks write disjoint C rows.
template <typename T>
void pgemm_nn(int64_t m, int64_t n, int64_t k, const T* a, int64_t lda,
              const T* b, int64_t ldb, T* c, int64_t ldc, bool accumulate) {
  constexpr int64_t kRowBlock = 16;
  if (num_workers() <= 1 || m <= kRowBlock || m * n * k < (1 << 16)) {
    gemm_nn(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
    return;
  }
  const int64_t blocks = div_up(m, kRowBlock);
  parallel_for(blocks, [&](int64_t i) {
    const int64_t lo = i * kRowBlock;
    const int64_t hi = std::min(m, lo + kRowBlock);
    gemm_nn(hi - lo, n, k, a + lo * lda, lda, b, ldb, c + lo * ldc, ldc,
            accumulate);
  });
}

// Reusable per-thread scratch; avoids refaulting large freshly mapped
// buffers on every conv call. Slots keep concurrent uses distinct.
template <typename T>
T* tls_scratch(size_t n, int slot) {
  struct Buf {
    std::unique_ptr<T[]> p;
    size_t cap = 0;
  };
  thread_local Buf bufs[4];
  Buf& b = bufs[slot];
  if (b.cap < n) {
    b.p = std::make_unique_for_overwrite<T[]>(n);
    b.cap = n;
  }
  return b.p.get();
}

template <typename T>
double softplus(T x) {
  const double v = static_cast<double>(x);
  if (v > 30.0) return v;
  if (v < -30.0) return std::exp(v);
  return std::log1p(std::exp(v));
}

inline double sigmoid_stable(double x) {
  if (x >= 0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

// ---------------------------------------------------------------------------
// matmul

template <typename T>
TensorPtrT<T> matmul(TapeT<T>* tape, const TensorPtrT<T>& a,
                     const TensorPtrT<T>& b) {
  ULID_CHECK(a->rank() == 2 && b->rank() == 2)
      << "matmul expects rank-2 operands, got " << shape_str(a->shape())
      << " and " << shape_str(b->shape());
  const int64_t m = a->dim(0), k = a->dim(1), k2 = b->dim(0), n = b->dim(1);
  if (k != k2) {
    ULID_ERR << "matmul: inner extents disagree: " << shape_str(a->shape())
             << " vs " << shape_str(b->shape());
  }
  auto out = make_tensor<T>(Shape{m, n}, false);
  pgemm_nn(m, n, k, a->data(), k, b->data(), n, out->data(), n, false);

  if (want_grad(tape, {&a, &b})) {
    out->requires_grad = true;
    tape->record([a, b, out, m, n, k]() {
      const T* g = out->grad();
      if (a->requires_grad) {
        // dA += dC * B^T
        gemm_abt(m, k, n, g, n, b->data(), n, a->grad(), k, true);
      }
      if (b->requires_grad) {
        // dB += A^T * dC
        std::vector<T> at(static_cast<size_t>(m) * k);
        transpose(m, k, a->data(), k, at.data(), m);
        gemm_nn(k, n, m, at.data(), m, g, n, b->grad(), n, true);
      }
    }, out);
  }
  return out;
}

// ---------------------------------------------------------------------------
// conv2d

namespace {

struct ConvDims {
  int64_t batch, cin, h, w;
  int64_t cout, kh, kw, sh, sw, ph, pw;
  int64_t oh, ow;
  bool batched;
  int64_t col_rows() const { return cin * kh * kw; }
  int64_t col_cols() const { return oh * ow; }
};

template <typename T>
ConvDims conv_dims(const TensorPtrT<T>& x, const TensorPtrT<T>& w,
                   const TensorPtrT<T>& bias, const Conv2dGeom& g) {
  ConvDims d{};
  ULID_CHECK(x->rank() == 3 || x->rank() == 4)
      << "conv2d input must be [Cin,H,W] or [B,Cin,H,W], got "
      << shape_str(x->shape());
  d.batched = x->rank() == 4;
  d.batch = d.batched ? x->dim(0) : 1;
  d.cin = x->dim(d.batched ? 1 : 0);
  d.h = x->dim(d.batched ? 2 : 1);
  d.w = x->dim(d.batched ? 3 : 2);
  ULID_CHECK(w->rank() == 4) << "conv2d kernel must be [Cout,Cin,kh,kw], got "
                             << shape_str(w->shape());
  d.cout = w->dim(0);
  ULID_CHECK(w->dim(1) == d.cin)
      << "conv2d: kernel expects " << w->dim(1) << " input channels, input has "
      << d.cin;
  d.kh = w->dim(2);
  d.kw = w->dim(3);
  ULID_CHECK(g.kh == d.kh && g.kw == d.kw)
      << "conv2d: geometry kernel " << g.kh << "x" << g.kw
      << " disagrees with kernel tensor " << d.kh << "x" << d.kw;
  ULID_CHECK(g.sh >= 1 && g.sw >= 1) << "conv2d: stride must be positive";
  ULID_CHECK(g.ph >= 0 && g.pw >= 0) << "conv2d: padding must be non-negative";
  d.sh = g.sh;
  d.sw = g.sw;
  d.ph = g.ph;
  d.pw = g.pw;
  d.oh = (d.h + 2 * d.ph - d.kh) / d.sh + 1;
  d.ow = (d.w + 2 * d.pw - d.kw) / d.sw + 1;
  if (d.h + 2 * d.ph - d.kh < 0 || d.oh < 1) {
    ULID_ERR << "conv2d: output height < 1 on axis H (H=" << d.h
             << ", kh=" << d.kh << ", pad=" << d.ph << ", stride=" << d.sh
             << ")";
  }
  if (d.w + 2 * d.pw - d.kw < 0 || d.ow < 1) {
    ULID_ERR << "conv2d: output width < 1 on axis W (W=" << d.w
             << ", kw=" << d.kw << ", pad=" << d.pw << ", stride=" << d.sw
             << ")";
  }
  if (bias != nullptr) {
    ULID_CHECK(bias->rank() == 1 && bias->dim(0) == d.cout)
        << "conv2d: bias must be [Cout]=" << d.cout << ", got "
        << shape_str(bias->shape());
  }
  return d;
}

// col[(cin*kh+ki)*kw+kj][oh*OW+ow] = x[cin][oh*sh-ph+ki][ow*sw-pw+kj] or 0.
// Row order matches the (cin, kh, kw) accumulation order of the reference.
template <typename T>
void im2col(const ConvDims& d, const T* x, T* col) {
  const int64_t n = d.col_cols();
  for (int64_t cin = 0; cin < d.cin; ++cin) {
    const T* xc = x + cin * d.h * d.w;
    for (int64_t ki = 0; ki < d.kh; ++ki) {
      for (int64_t kj = 0; kj < d.kw; ++kj) {
        T* row = col + ((cin * d.kh + ki) * d.kw + kj) * n;
        for (int64_t oh = 0; oh < d.oh; ++oh) {
          const int64_t ih = oh * d.sh - d.ph + ki;
          T* dst = row + oh * d.ow;
          if (ih < 0 || ih >= d.h) {
            std::memset(dst, 0, sizeof(T) * d.ow);
            continue;
          }
          // valid ow range: 0 <= ow*sw - pw + kj < W
          int64_t lo = 0;
          if (d.pw > kj) lo = div_up(d.pw - kj, d.sw);
          int64_t hi = (d.w - 1 + d.pw - kj) / d.sw;  // inclusive
          hi = std::min(hi, d.ow - 1);
          if (lo > 0) std::memset(dst, 0, sizeof(T) * std::min(lo, d.ow));
          if (hi < d.ow - 1 && hi + 1 < d.ow) {
            std::memset(dst + hi + 1, 0, sizeof(T) * (d.ow - hi - 1));
          }
          if (lo > hi) continue;
          const T* src = xc + ih * d.w + lo * d.sw - d.pw + kj;
          if (d.sw == 1) {
            std::memcpy(dst + lo, src, sizeof(T) * (hi - lo + 1));
          } else {
            for (int64_t ow = lo; ow <= hi; ++ow) {
              dst[ow] = src[(ow - lo) * d.sw];
            }
          }
        }
      }
    }
  }
}

// Scatter-add transpose of im2col.
template <typename T>
void col2im_add(const ConvDims& d, const T* col, T* dx) {
  const int64_t n = d.col_cols();
  for (int64_t cin = 0; cin < d.cin; ++cin) {
    T* xc = dx + cin * d.h * d.w;
    for (int64_t ki = 0; ki < d.kh; ++ki) {
      for (int64_t kj = 0; kj < d.kw; ++kj) {
        const T* row = col + ((cin * d.kh + ki) * d.kw + kj) * n;
        for (int64_t oh = 0; oh < d.oh; ++oh) {
          const int64_t ih = oh * d.sh - d.ph + ki;
          if (ih < 0 || ih >= d.h) continue;
          int64_t lo = 0;
          if (d.pw > kj) lo = div_up(d.pw - kj, d.sw);
          int64_t hi = (d.w - 1 + d.pw - kj) / d.sw;
          hi = std::min(hi, d.ow - 1);
          if (lo > hi) continue;
          const T* src = row + oh * d.ow;
          T* dst = xc + ih * d.w + lo * d.sw - d.pw + kj;
          for (int64_t ow = lo; ow <= hi; ++ow) {
            dst[(ow - lo) * d.sw] += src[ow];
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
TensorPtrT<T> conv2d(TapeT<T>* tape, const TensorPtrT<T>& x,
                     const TensorPtrT<T>& w, const TensorPtrT<T>& bias,
                     const Conv2dGeom& geom) {
  const ConvDims d = conv_dims(x, w, bias, geom);
  const int64_t kk = d.col_rows(), n = d.col_cols();
  Shape out_shape = d.batched ? Shape{d.batch, d.cout, d.oh, d.ow}
                              : Shape{d.cout, d.oh, d.ow};
  auto out = make_tensor<T>(out_shape, false);

  parallel_for(d.batch, [&](int64_t b) {
    T* col = tls_scratch<T>(static_cast<size_t>(kk) * n, 0);
    im2col(d, x->data() + b * d.cin * d.h * d.w, col);
    T* yb = out->data() + b * d.cout * n;
    gemm_nn(d.cout, n, kk, w->data(), kk, col, n, yb, n, false);
    if (bias != nullptr) {
      for (int64_t c = 0; c < d.cout; ++c) {
        const T bv = bias->at(c);
        T* row = yb + c * n;
        for (int64_t i = 0; i < n; ++i) row[i] += bv;
      }
    }
  });

  if (want_grad(tape, {&x, &w, &bias})) {
    out->requires_grad = true;
    tape->record([x, w, bias, out, d, kk, n]() {
      const T* gy = out->grad();
      const bool need_dx = x->requires_grad;
      const bool need_dw = w->requires_grad;
      const bool need_db = bias != nullptr && bias->requires_grad;

      std::vector<T> wt;
      if (need_dx) {
        wt.resize(static_cast<size_t>(kk) * d.cout);
        transpose(d.cout, kk, w->data(), kk, wt.data(), d.cout);
      }
      std::vector<std::vector<T>> dwb;
      if (need_dw) dwb.assign(d.batch, {});

      parallel_for(d.batch, [&](int64_t b) {
        const T* gyb = gy + b * d.cout * n;
        if (need_dw) {
          T* col = tls_scratch<T>(static_cast<size_t>(kk) * n, 0);
          im2col(d, x->data() + b * d.cin * d.h * d.w, col);
          dwb[b].resize(static_cast<size_t>(d.cout) * kk);
          gemm_abt(d.cout, kk, n, gyb, n, col, n, dwb[b].data(), kk, false);
        }
        if (need_dx) {
          T* colg = tls_scratch<T>(static_cast<size_t>(kk) * n, 1);
          gemm_nn(kk, n, d.cout, wt.data(), d.cout, gyb, n, colg, n, false);
          col2im_add(d, colg, x->grad() + b * d.cin * d.h * d.w);
        }
      });

      if (need_dw) {
        T* gw = w->grad();
        const int64_t wn = d.cout * kk;
        for (int64_t b = 0; b < d.batch; ++b) {
          const T* src = dwb[b].data();
          for (int64_t i = 0; i < wn; ++i) gw[i] += src[i];
        }
      }
      if (need_db) {
        T* gb = bias->grad();
        for (int64_t b = 0; b < d.batch; ++b) {
          for (int64_t c = 0; c < d.cout; ++c) {
            const T* row = gy + (b * d.cout + c) * n;
            double s = 0;
            for (int64_t i = 0; i < n; ++i) s += row[i];
            gb[c] += static_cast<T>(s);
          }
        }
      }
    }, out);
  }
  return out;
}

// ---------------------------------------------------------------------------
// unary elementwise

namespace {

enum class Unary { kRelu, kTanh, kSigmoid, kLog, kExp, kNeg };

template <typename T>
TensorPtrT<T> unary_op(TapeT<T>* tape, const TensorPtrT<T>& x, Unary kind) {
  const int64_t n = x->numel();
  if (kind == Unary::kLog) {
    for (int64_t i = 0; i < n; ++i) {
      if (!(x->at(i) > T(0))) {
        ULID_ERR << "log of non-positive value " << x->at(i) << " at index "
                 << i;
      }
    }
  }
  auto out = make_tensor<T>(x->shape(), false);
  const T* xd = x->data();
  T* yd = out->data();
  for_chunks(n, [&](int64_t lo, int64_t hi) {
    switch (kind) {
      case Unary::kRelu:
        for (int64_t i = lo; i < hi; ++i) yd[i] = xd[i] > T(0) ? xd[i] : T(0);
        break;
      case Unary::kTanh:
        for (int64_t i = lo; i < hi; ++i) yd[i] = std::tanh(xd[i]);
        break;
      case Unary::kSigmoid:
        for (int64_t i = lo; i < hi; ++i) {
          yd[i] = static_cast<T>(sigmoid_stable(static_cast<double>(xd[i])));
        }
        break;
      case Unary::kLog:
        for (int64_t i = lo; i < hi; ++i) yd[i] = std::log(xd[i]);
        break;
      case Unary::kExp:
        for (int64_t i = lo; i < hi; ++i) yd[i] = std::exp(xd[i]);
        break;
      case Unary::kNeg:
        for (int64_t i = lo; i < hi; ++i) yd[i] = -xd[i];
        break;
    }
  });

  if (want_grad(tape, {&x})) {
    out->requires_grad = true;
    tape->record([x, out, kind, n]() {
      const T* g = out->grad();
      const T* xd2 = x->data();
      const T* yd2 = out->data();
      T* gx = x->grad();
      for_chunks(n, [&](int64_t lo, int64_t hi) {
        switch (kind) {
          case Unary::kRelu:
            for (int64_t i = lo; i < hi; ++i) {
              if (xd2[i] > T(0)) gx[i] += g[i];
            }
            break;
          case Unary::kTanh:
            for (int64_t i = lo; i < hi; ++i) {
              gx[i] += g[i] * (T(1) - yd2[i] * yd2[i]);
            }
            break;
          case Unary::kSigmoid:
            for (int64_t i = lo; i < hi; ++i) {
              gx[i] += g[i] * yd2[i] * (T(1) - yd2[i]);
            }
            break;
          case Unary::kLog:
            for (int64_t i = lo; i < hi; ++i) gx[i] += g[i] / xd2[i];
            break;
          case Unary::kExp:
            for (int64_t i = lo; i < hi; ++i) gx[i] += g[i] * yd2[i];
            break;
          case Unary::kNeg:
            for (int64_t i = lo; i < hi; ++i) gx[i] -= g[i];
            break;
        }
      });
    }, out);
  }
  return out;
}

}  // namespace

template <typename T>
TensorPtrT<T> relu(TapeT<T>* tape, const TensorPtrT<T>& x) {
  return unary_op(tape, x, Unary::kRelu);
}
template <typename T>
TensorPtrT<T> tanh_op(TapeT<T>* tape, const TensorPtrT<T>& x) {
  return unary_op(tape, x, Unary::kTanh);
}
template <typename T>
TensorPtrT<T> sigmoid_op(TapeT<T>* tape, const TensorPtrT<T>& x) {
  return unary_op(tape, x, Unary::kSigmoid);
}
template <typename T>
TensorPtrT<T> log_op(TapeT<T>* tape, const TensorPtrT<T>& x) {
  return unary_op(tape, x, Unary::kLog);
}
template <typename T>
TensorPtrT<T> exp_op(TapeT<T>* tape, const TensorPtrT<T>& x) {
  return unary_op(tape, x, Unary::kExp);
}
template <typename T>
TensorPtrT<T> neg_op(TapeT<T>* tape, const TensorPtrT<T>& x) {
  return unary_op(tape, x, Unary::kNeg);
}

// ---------------------------------------------------------------------------
// binary elementwise (same shape, or b broadcast along the channel axis)

namespace {

enum class Binary { kAdd, kSub, kMul };

template <typename T>
TensorPtrT<T> binary_op(TapeT<T>* tape, const TensorPtrT<T>& a,
                        const TensorPtrT<T>& b, Binary kind) {
  const bool same = a->shape() == b->shape();
  bool bcast = false;
  int64_t channels = 0, inner = 1, outerdim = 1;
  if (!same) {
    // b must be a vector matching a's channel axis (axis 1 of rank >= 2).
    if (a->rank() >= 2 && b->rank() == 1 && b->dim(0) == a->dim(1)) {
      bcast = true;
      channels = a->dim(1);
      outerdim = a->dim(0);
      for (int i = 2; i < a->rank(); ++i) inner *= a->dim(i);
    } else {
      ULID_ERR << "elementwise op: shape mismatch " << shape_str(a->shape())
               << " vs " << shape_str(b->shape())
               << " (only channel-axis vectors broadcast)";
    }
  }

  auto out = make_tensor<T>(a->shape(), false);
  const int64_t n = a->numel();
  const T* ad = a->data();
  const T* bd = b->data();
  T* yd = out->data();
  if (same) {
    for_chunks(n, [&](int64_t lo, int64_t hi) {
      switch (kind) {
        case Binary::kAdd:
          for (int64_t i = lo; i < hi; ++i) yd[i] = ad[i] + bd[i];
          break;
        case Binary::kSub:
          for (int64_t i = lo; i < hi; ++i) yd[i] = ad[i] - bd[i];
          break;
        case Binary::kMul:
          for (int64_t i = lo; i < hi; ++i) yd[i] = ad[i] * bd[i];
          break;
      }
    });
  } else {
    parallel_for(outerdim * channels, [&](int64_t oc) {
      const T bv = bd[oc % channels];
      const T* arow = ad + oc * inner;
      T* yrow = yd + oc * inner;
      switch (kind) {
        case Binary::kAdd:
          for (int64_t i = 0; i < inner; ++i) yrow[i] = arow[i] + bv;
          break;
        case Binary::kSub:
          for (int64_t i = 0; i < inner; ++i) yrow[i] = arow[i] - bv;
          break;
        case Binary::kMul:
          for (int64_t i = 0; i < inner; ++i) yrow[i] = arow[i] * bv;
          break;
      }
    });
  }

  if (want_grad(tape, {&a, &b})) {
    out->requires_grad = true;
    tape->record([a, b, out, kind, same, channels, inner, outerdim, n]() {
      const T* g = out->grad();
      if (a->requires_grad) {
        T* ga = a->grad();
        const T* bd2 = b->data();
        if (kind == Binary::kMul) {
          if (same) {
            for_chunks(n, [&](int64_t lo, int64_t hi) {
              for (int64_t i = lo; i < hi; ++i) ga[i] += g[i] * bd2[i];
            });
          } else {
            parallel_for(outerdim * channels, [&](int64_t oc) {
              const T bv = bd2[oc % channels];
              for (int64_t i = 0; i < inner; ++i) {
                ga[oc * inner + i] += g[oc * inner + i] * bv;
              }
            });
          }
        } else {
          for_chunks(n, [&](int64_t lo, int64_t hi) {
            for (int64_t i = lo; i < hi; ++i) ga[i] += g[i];
          });
        }
      }
      if (b->requires_grad) {
        T* gb = b->grad();
        const T* ad2 = a->data();
        const T sign = kind == Binary::kSub ? T(-1) : T(1);
        if (same) {
          for_chunks(n, [&](int64_t lo, int64_t hi) {
            for (int64_t i = lo; i < hi; ++i) {
              gb[i] += sign * (kind == Binary::kMul ? g[i] * ad2[i] : g[i]);
            }
          });
        } else {
          parallel_for(channels, [&](int64_t c) {
            double s = 0;
            for (int64_t o = 0; o < outerdim; ++o) {
              const int64_t base = (o * channels + c) * inner;
              for (int64_t i = 0; i < inner; ++i) {
                s += static_cast<double>(
                    kind == Binary::kMul ? g[base + i] * ad2[base + i]
                                         : g[base + i]);
              }
            }
            gb[c] += static_cast<T>(sign * s);
          });
        }
      }
    }, out);
  }
  return out;
}

}  // namespace

template <typename T>
TensorPtrT<T> add(TapeT<T>* tape, const TensorPtrT<T>& a,
                  const TensorPtrT<T>& b) {
  return binary_op(tape, a, b, Binary::kAdd);
}
template <typename T>
TensorPtrT<T> sub(TapeT<T>* tape, const TensorPtrT<T>& a,
                  const TensorPtrT<T>& b) {
  return binary_op(tape, a, b, Binary::kSub);
}
template <typename T>
TensorPtrT<T> mul(TapeT<T>* tape, const TensorPtrT<T>& a,
                  const TensorPtrT<T>& b) {
  return binary_op(tape, a, b, Binary::kMul);
}

template <typename T>
TensorPtrT<T> affine(TapeT<T>* tape, const TensorPtrT<T>& x, double scale,
                     double shift) {
  auto out = make_tensor<T>(x->shape(), false);
  const int64_t n = x->numel();
  const T* xd = x->data();
  T* yd = out->data();
  const T s = static_cast<T>(scale), c = static_cast<T>(shift);
  for_chunks(n, [&](int64_t lo, int64_t hi) {
    for (int64_t i = lo; i < hi; ++i) yd[i] = s * xd[i] + c;
  });
  if (want_grad(tape, {&x})) {
    out->requires_grad = true;
    tape->record([x, out, s, n]() {
      const T* g = out->grad();
      T* gx = x->grad();
      for_chunks(n, [&](int64_t lo, int64_t hi) {
        for (int64_t i = lo; i < hi; ++i) gx[i] += s * g[i];
      });
    }, out);
  }
  return out;
}

// ---------------------------------------------------------------------------
// reduce

template <typename T>
TensorPtrT<T> reduce(TapeT<T>* tape, const TensorPtrT<T>& x, int axis,
                     Reduce mode) {
  ULID_CHECK(axis >= 0 && axis < x->rank())
      << "reduce: axis " << axis << " out of range for "
      << shape_str(x->shape());
  const int64_t red = x->dim(axis);
  ULID_CHECK(red >= 1) << "reduce: empty axis";
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= x->dim(i);
  for (int i = axis + 1; i < x->rank(); ++i) inner *= x->dim(i);
  Shape out_shape;
  for (int i = 0; i < x->rank(); ++i) {
    if (i != axis) out_shape.push_back(x->dim(i));
  }
  if (out_shape.empty()) out_shape = {1};

  auto out = make_tensor<T>(out_shape, false);
  auto argmax = mode == Reduce::kMax
                    ? std::make_shared<std::vector<int64_t>>(outer * inner)
                    : nullptr;
  const T* xd = x->data();
  T* yd = out->data();
  parallel_for(outer, [&](int64_t o) {
    for (int64_t i = 0; i < inner; ++i) {
      const T* base = xd + (o * red) * inner + i;
      if (mode == Reduce::kMax) {
        T best = base[0];
        int64_t bi = 0;
        for (int64_t r = 1; r < red; ++r) {
          const T v = base[r * inner];
          if (v > best) {  // strict: first occurrence wins ties
            best = v;
            bi = r;
          }
        }
        yd[o * inner + i] = best;
        (*argmax)[o * inner + i] = bi;
      } else {
        double s = 0;
        for (int64_t r = 0; r < red; ++r) s += static_cast<double>(base[r * inner]);
        if (mode == Reduce::kMean) s /= static_cast<double>(red);
        yd[o * inner + i] = static_cast<T>(s);
      }
    }
  });

  if (want_grad(tape, {&x})) {
    out->requires_grad = true;
    tape->record([x, out, argmax, mode, outer, inner, red]() {
      const T* g = out->grad();
      T* gx = x->grad();
      parallel_for(outer, [&](int64_t o) {
        for (int64_t i = 0; i < inner; ++i) {
          const T gv = g[o * inner + i];
          T* base = gx + (o * red) * inner + i;
          switch (mode) {
            case Reduce::kMean: {
              const T give = gv / static_cast<T>(red);
              for (int64_t r = 0; r < red; ++r) base[r * inner] += give;
              break;
            }
            case Reduce::kSum:
              for (int64_t r = 0; r < red; ++r) base[r * inner] += gv;
              break;
            case Reduce::kMax:
              base[(*argmax)[o * inner + i] * inner] += gv;
              break;
          }
        }
      });
    }, out);
  }
  return out;
}

// ---------------------------------------------------------------------------
// softmax cross entropy

template <typename T>
TensorPtrT<T> softmax_cross_entropy(TapeT<T>* tape,
                                    const TensorPtrT<T>& logits,
                                    const std::vector<int>& labels) {
  ULID_CHECK(logits->rank() == 2)
      << "softmax_cross_entropy expects [N x K] logits, got "
      << shape_str(logits->shape());
  const int64_t n = logits->dim(0), k = logits->dim(1);
  ULID_CHECK(static_cast<int64_t>(labels.size()) == n)
      << "softmax_cross_entropy: " << labels.size() << " labels for " << n
      << " rows";
  for (int64_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] >= k) {
      ULID_ERR << "label " << labels[i] << " out of range [0, " << k
               << ") at row " << i;
    }
  }

  auto probs = std::make_shared<std::vector<T>>(n * k);
  double loss_sum = 0;
  const T* xd = logits->data();
  for (int64_t i = 0; i < n; ++i) {
    const T* row = xd + i * k;
    double m = row[0];
    for (int64_t j = 1; j < k; ++j) m = std::max(m, static_cast<double>(row[j]));
    double se = 0;
    for (int64_t j = 0; j < k; ++j) se += std::exp(static_cast<double>(row[j]) - m);
    const double log_z = m + std::log(se);
    loss_sum += log_z - static_cast<double>(row[labels[i]]);
    T* prow = probs->data() + i * k;
    for (int64_t j = 0; j < k; ++j) {
      prow[j] = static_cast<T>(std::exp(static_cast<double>(row[j]) - log_z));
    }
  }
  auto out = make_tensor<T>(Shape{1}, false);
  out->at(0) = static_cast<T>(loss_sum / static_cast<double>(n));

  if (want_grad(tape, {&logits})) {
    out->requires_grad = true;
    auto labels_copy = std::make_shared<std::vector<int>>(labels);
    tape->record([logits, out, probs, labels_copy, n, k]() {
      const T g = out->grad()[0];
      T* gx = logits->grad();
      const T invn = T(1) / static_cast<T>(n);
      for (int64_t i = 0; i < n; ++i) {
        const T* prow = probs->data() + i * k;
        T* grow = gx + i * k;
        const int y = (*labels_copy)[i];
        for (int64_t j = 0; j < k; ++j) {
          const T delta = j == y ? T(1) : T(0);
          grow[j] += g * (prow[j] - delta) * invn;
        }
      }
    }, out);
  }
  return out;
}

// ---------------------------------------------------------------------------
// batchnorm

template <typename T>
TensorPtrT<T> batchnorm(TapeT<T>* tape, const TensorPtrT<T>& x,
                        const TensorPtrT<T>& gamma, const TensorPtrT<T>& beta,
                        const TensorPtrT<T>& run_mean,
                        const TensorPtrT<T>& run_var, bool training,
                        double momentum, double eps) {
  ULID_CHECK(x->rank() >= 2) << "batchnorm input must have a channel axis, got "
                             << shape_str(x->shape());
  const int64_t batch = x->dim(0), channels = x->dim(1);
  int64_t spatial = 1;
  for (int i = 2; i < x->rank(); ++i) spatial *= x->dim(i);
  const int64_t count = batch * spatial;
  ULID_CHECK(gamma->numel() == channels && beta->numel() == channels &&
             run_mean->numel() == channels && run_var->numel() == channels)
      << "batchnorm: parameter length mismatch for " << channels
      << " channels";

  auto mean = std::make_shared<std::vector<double>>(channels);
  auto inv_std = std::make_shared<std::vector<double>>(channels);
  auto out = make_tensor<T>(x->shape(), false);
  const T* xd = x->data();
  T* yd = out->data();

  parallel_for(channels, [&](int64_t c) {
    double mu, var;
    if (training) {
      double s = 0;
      for (int64_t b = 0; b < batch; ++b) {
        const T* base = xd + (b * channels + c) * spatial;
        for (int64_t i = 0; i < spatial; ++i) s += static_cast<double>(base[i]);
      }
      mu = s / static_cast<double>(count);
      double s2 = 0;
      for (int64_t b = 0; b < batch; ++b) {
        const T* base = xd + (b * channels + c) * spatial;
        for (int64_t i = 0; i < spatial; ++i) {
          const double dlt = static_cast<double>(base[i]) - mu;
          s2 += dlt * dlt;
        }
      }
      var = s2 / static_cast<double>(count);
      run_mean->at(c) = static_cast<T>(momentum * run_mean->at(c) + (1 - momentum) * mu);
      run_var->at(c) = static_cast<T>(momentum * run_var->at(c) + (1 - momentum) * var);
    } else {
      mu = static_cast<double>(run_mean->at(c));
      var = static_cast<double>(run_var->at(c));
    }
    const double inv = 1.0 / std::sqrt(var + eps);
    (*mean)[c] = mu;
    (*inv_std)[c] = inv;
    const double gc = static_cast<double>(gamma->at(c));
    const double bc = static_cast<double>(beta->at(c));
    const T a = static_cast<T>(gc * inv);
    const T b2 = static_cast<T>(bc - gc * inv * mu);
    for (int64_t b = 0; b < batch; ++b) {
      const T* src = xd + (b * channels + c) * spatial;
      T* dst = yd + (b * channels + c) * spatial;
      for (int64_t i = 0; i < spatial; ++i) dst[i] = a * src[i] + b2;
    }
  });

  if (want_grad(tape, {&x, &gamma, &beta})) {
    out->requires_grad = true;
    tape->record([x, gamma, beta, out, mean, inv_std, training, batch,
                  channels, spatial, count]() {
      const T* g = out->grad();
      const T* xd2 = x->data();
      parallel_for(channels, [&](int64_t c) {
        const double mu = (*mean)[c];
        const double inv = (*inv_std)[c];
        const double gc = static_cast<double>(gamma->at(c));
        // reduce: sum g and sum g * xhat
        double sg = 0, sgx = 0;
        for (int64_t b = 0; b < batch; ++b) {
          const int64_t base = (b * channels + c) * spatial;
          for (int64_t i = 0; i < spatial; ++i) {
            const double gv = static_cast<double>(g[base + i]);
            sg += gv;
            sgx += gv * (static_cast<double>(xd2[base + i]) - mu) * inv;
          }
        }
        if (gamma->requires_grad) gamma->grad()[c] += static_cast<T>(sgx);
        if (beta->requires_grad) beta->grad()[c] += static_cast<T>(sg);
        if (x->requires_grad) {
          T* gx = x->grad();
          if (training) {
            const double k1 = gc * inv;
            const double mg = sg / static_cast<double>(count);
            const double mgx = sgx / static_cast<double>(count);
            for (int64_t b = 0; b < batch; ++b) {
              const int64_t base = (b * channels + c) * spatial;
              for (int64_t i = 0; i < spatial; ++i) {
                const double xh =
                    (static_cast<double>(xd2[base + i]) - mu) * inv;
                gx[base + i] += static_cast<T>(
                    k1 * (static_cast<double>(g[base + i]) - mg - xh * mgx));
              }
            }
          } else {
            const T k1 = static_cast<T>(gc * inv);
            for (int64_t b = 0; b < batch; ++b) {
              const int64_t base = (b * channels + c) * spatial;
              for (int64_t i = 0; i < spatial; ++i) {
                gx[base + i] += k1 * g[base + i];
              }
            }
          }
        }
      });
    }, out);
  }
  return out;
}

// ---------------------------------------------------------------------------
// reshape / time_slice

template <typename T>
TensorPtrT<T> reshape(TapeT<T>* tape, const TensorPtrT<T>& x, Shape shape) {
  ULID_CHECK(shape_numel(shape) == x->numel())
      << "reshape: " << shape_str(x->shape()) << " -> " << shape_str(shape)
      << " changes element count";
  auto out = make_tensor<T>(shape, false);
  std::memcpy(out->data(), x->data(), sizeof(T) * x->numel());
  if (want_grad(tape, {&x})) {
    out->requires_grad = true;
    tape->record([x, out]() {
      const T* g = out->grad();
      T* gx = x->grad();
      const int64_t n = x->numel();
      for_chunks(n, [&](int64_t lo, int64_t hi) {
        for (int64_t i = lo; i < hi; ++i) gx[i] += g[i];
      });
    }, out);
  }
  return out;
}

template <typename T>
TensorPtrT<T> time_slice(TapeT<T>* tape, const TensorPtrT<T>& x, int64_t t) {
  ULID_CHECK(x->rank() == 3) << "time_slice expects [B,D,L], got "
                             << shape_str(x->shape());
  const int64_t batch = x->dim(0), dim = x->dim(1), len = x->dim(2);
  ULID_CHECK(t >= 0 && t < len) << "time_slice: t=" << t << " outside L=" << len;
  auto out = make_tensor<T>(Shape{batch, dim}, false);
  const T* xd = x->data();
  T* yd = out->data();
  for (int64_t b = 0; b < batch; ++b) {
    for (int64_t d = 0; d < dim; ++d) {
      yd[b * dim + d] = xd[(b * dim + d) * len + t];
    }
  }
  if (want_grad(tape, {&x})) {
    out->requires_grad = true;
    tape->record([x, out, t, batch, dim, len]() {
      const T* g = out->grad();
      T* gx = x->grad();
      for (int64_t b = 0; b < batch; ++b) {
        for (int64_t d = 0; d < dim; ++d) {
          gx[(b * dim + d) * len + t] += g[b * dim + d];
        }
      }
    }, out);
  }
  return out;
}

// ---------------------------------------------------------------------------
// learnable dictionary encoding

template <typename T>
TensorPtrT<T> lde_encode(TapeT<T>* tape, const TensorPtrT<T>& x,
                         const TensorPtrT<T>& mu, const TensorPtrT<T>& shat,
                         bool mass_norm) {
  ULID_CHECK(x->rank() == 3) << "lde_encode expects [B,D,L] input, got "
                             << shape_str(x->shape());
  ULID_CHECK(mu->rank() == 2) << "lde_encode expects [C,D] dictionary, got "
                              << shape_str(mu->shape());
  const int64_t batch = x->dim(0), dim = x->dim(1), len = x->dim(2);
  const int64_t comps = mu->dim(0);
  ULID_CHECK(mu->dim(1) == dim)
      << "lde_encode: dictionary dim " << mu->dim(1) << " vs input dim " << dim;
  ULID_CHECK(shat->rank() == 1 && shat->dim(0) == comps)
      << "lde_encode: scale vector must be [C]=" << comps;
  ULID_CHECK(len >= 1 && comps >= 1) << "lde_encode: L and C must be >= 1";

  auto s = std::make_shared<std::vector<double>>(comps);
  for (int64_t c = 0; c < comps; ++c) (*s)[c] = softplus(shat->at(c));

  auto out = make_tensor<T>(Shape{batch, comps * dim}, true);
  // Saved per-frame assignment responsibilities, [B][L][C].
  auto wsave = std::make_shared<std::vector<double>>(batch * len * comps);
  auto msave = std::make_shared<std::vector<double>>(batch * comps);

  const T* xd = x->data();
  const T* mud = mu->data();

  parallel_for(batch, [&](int64_t b) {
    // Frame-major copy of this utterance for contiguous access.
    std::vector<double> xt(static_cast<size_t>(len) * dim);
    for (int64_t d = 0; d < dim; ++d) {
      const T* src = xd + (b * dim + d) * len;
      for (int64_t t = 0; t < len; ++t) xt[t * dim + d] = src[t];
    }
    std::vector<double> acc(static_cast<size_t>(comps) * dim, 0.0);
    std::vector<double> dist(comps);
    double* wrow_all = wsave->data() + b * len * comps;
    double* mass = msave->data() + b * comps;
    for (int64_t c = 0; c < comps; ++c) mass[c] = 0;
    for (int64_t t = 0; t < len; ++t) {
      const double* ft = xt.data() + t * dim;
      double amax = -1e300;
      for (int64_t c = 0; c < comps; ++c) {
        const T* mc = mud + c * dim;
        double d2 = 0;
        for (int64_t d = 0; d < dim; ++d) {
          const double r = ft[d] - static_cast<double>(mc[d]);
          d2 += r * r;
        }
        dist[c] = d2;
        const double a = -(*s)[c] * d2;
        if (a > amax) amax = a;
      }
      double z = 0;
      double* wrow = wrow_all + t * comps;
      for (int64_t c = 0; c < comps; ++c) {
        wrow[c] = std::exp(-(*s)[c] * dist[c] - amax);
        z += wrow[c];
      }
      for (int64_t c = 0; c < comps; ++c) {
        wrow[c] /= z;
        mass[c] += wrow[c];
        const double wc = wrow[c];
        const T* mc = mud + c * dim;
        double* arow = acc.data() + c * dim;
        for (int64_t d = 0; d < dim; ++d) {
          arow[d] += wc * (ft[d] - static_cast<double>(mc[d]));
        }
      }
    }
    T* orow = out->data() + b * comps * dim;
    for (int64_t c = 0; c < comps; ++c) {
      const double denom = mass_norm ? std::max(mass[c], 1e-30)
                                     : static_cast<double>(len);
      for (int64_t d = 0; d < dim; ++d) {
        orow[c * dim + d] = static_cast<T>(acc[c * dim + d] / denom);
      }
    }
  });

  if (want_grad(tape, {&x, &mu, &shat})) {
    out->requires_grad = true;
    tape->record([x, mu, shat, out, s, wsave, msave, mass_norm, batch, dim,
                  len, comps]() {
      const T* xd2 = x->data();
      const T* mud2 = mu->data();
      const T* g = out->grad();
      const T* od = out->data();
      std::vector<std::vector<double>> dmu_b(batch), ds_b(batch);
      parallel_for(batch, [&](int64_t b) {
        std::vector<double> xt(static_cast<size_t>(len) * dim);
        for (int64_t d = 0; d < dim; ++d) {
          const T* src = xd2 + (b * dim + d) * len;
          for (int64_t t = 0; t < len; ++t) xt[t * dim + d] = src[t];
        }
        dmu_b[b].assign(comps * dim, 0.0);
        ds_b[b].assign(comps, 0.0);
        std::vector<double> dxt(static_cast<size_t>(len) * dim, 0.0);
        const double* wrow_all = wsave->data() + b * len * comps;
        const double* mass = msave->data() + b * comps;
        const T* grow = g + b * comps * dim;
        const T* orow = od + b * comps * dim;
        std::vector<double> dw(comps), da(comps), rbuf(dim);
        for (int64_t t = 0; t < len; ++t) {
          const double* ft = xt.data() + t * dim;
          const double* wrow = wrow_all + t * comps;
          // dw_tc and the softmax pullback
          double wda = 0;
          for (int64_t c = 0; c < comps; ++c) {
            const T* mc = mud2 + c * dim;
            const T* gc = grow + c * dim;
            double p = 0;
            for (int64_t d = 0; d < dim; ++d) {
              p += static_cast<double>(gc[d]) *
                   (ft[d] - static_cast<double>(mc[d]));
            }
            double dwc;
            if (mass_norm) {
              double ge = 0;
              const T* ec = orow + c * dim;
              for (int64_t d = 0; d < dim; ++d) {
                ge += static_cast<double>(gc[d]) * static_cast<double>(ec[d]);
              }
              dwc = (p - ge) / std::max(mass[c], 1e-30);
            } else {
              dwc = p / static_cast<double>(len);
            }
            dw[c] = dwc;
            wda += wrow[c] * dwc;
          }
          for (int64_t c = 0; c < comps; ++c) {
            da[c] = wrow[c] * (dw[c] - wda);
          }
          // distribute into dx, dmu, ds
          double* dxrow = dxt.data() + t * dim;
          for (int64_t c = 0; c < comps; ++c) {
            const T* mc = mud2 + c * dim;
            const T* gc = grow + c * dim;
            const double coef =
                wrow[c] / (mass_norm ? std::max(mass[c], 1e-30)
                                     : static_cast<double>(len));
            const double rs = -2.0 * (*s)[c] * da[c];
            double d2 = 0;
            double* dmrow = dmu_b[b].data() + c * dim;
            for (int64_t d = 0; d < dim; ++d) {
              const double r = ft[d] - static_cast<double>(mc[d]);
              d2 += r * r;
              const double dr = coef * static_cast<double>(gc[d]) + rs * r;
              dxrow[d] += dr;
              dmrow[d] -= dr;
            }
            ds_b[b][c] += da[c] * (-d2);
          }
        }
        if (x->requires_grad) {
          T* gx = x->grad();
          for (int64_t d = 0; d < dim; ++d) {
            T* dst = gx + (b * dim + d) * len;
            for (int64_t t = 0; t < len; ++t) {
              dst[t] += static_cast<T>(dxt[t * dim + d]);
            }
          }
        }
      });
      if (mu->requires_grad) {
        T* gm = mu->grad();
        for (int64_t b = 0; b < batch; ++b) {
          for (int64_t i = 0; i < comps * dim; ++i) {
            gm[i] += static_cast<T>(dmu_b[b][i]);
          }
        }
      }
      if (shat->requires_grad) {
        T* gs = shat->grad();
        for (int64_t c = 0; c < comps; ++c) {
          double total = 0;
          for (int64_t b = 0; b < batch; ++b) total += ds_b[b][c];
          const double dsoft = sigmoid_stable(static_cast<double>(shat->at(c)));
          gs[c] += static_cast<T>(total * dsoft);
        }
      }
    }, out);
  }
  return out;
}

template <typename T>
std::vector<double> log_softmax_row(const TensorT<T>& logits, int64_t row) {
  ULID_CHECK(logits.rank() == 2) << "log_softmax_row expects [N x K]";
  const int64_t k = logits.dim(1);
  const T* r = logits.data() + row * k;
  double m = static_cast<double>(r[0]);
  for (int64_t j = 1; j < k; ++j) m = std::max(m, static_cast<double>(r[j]));
  double se = 0;
  for (int64_t j = 0; j < k; ++j) se += std::exp(static_cast<double>(r[j]) - m);
  const double log_z = m + std::log(se);
  std::vector<double> out(k);
  for (int64_t j = 0; j < k; ++j) out[j] = static_cast<double>(r[j]) - log_z;
  return out;
}

// ---------------------------------------------------------------------------
// explicit instantiations

#define ULID_INSTANTIATE_OPS(T)                                                \
  template TensorPtrT<T> matmul(TapeT<T>*, const TensorPtrT<T>&,              \
                                const TensorPtrT<T>&);                        \
  template TensorPtrT<T> conv2d(TapeT<T>*, const TensorPtrT<T>&,              \
                                const TensorPtrT<T>&, const TensorPtrT<T>&,   \
                                const Conv2dGeom&);                           \
  template TensorPtrT<T> relu(TapeT<T>*, const TensorPtrT<T>&);               \
  template TensorPtrT<T> tanh_op(TapeT<T>*, const TensorPtrT<T>&);            \
  template TensorPtrT<T> sigmoid_op(TapeT<T>*, const TensorPtrT<T>&);         \
  template TensorPtrT<T> log_op(TapeT<T>*, const TensorPtrT<T>&);             \
  template TensorPtrT<T> exp_op(TapeT<T>*, const TensorPtrT<T>&);             \
  template TensorPtrT<T> neg_op(TapeT<T>*, const TensorPtrT<T>&);             \
  template TensorPtrT<T> add(TapeT<T>*, const TensorPtrT<T>&,                 \
                             const TensorPtrT<T>&);                           \
  template TensorPtrT<T> sub(TapeT<T>*, const TensorPtrT<T>&,                 \
                             const TensorPtrT<T>&);                           \
  template TensorPtrT<T> mul(TapeT<T>*, const TensorPtrT<T>&,                 \
                             const TensorPtrT<T>&);                           \
  template TensorPtrT<T> affine(TapeT<T>*, const TensorPtrT<T>&, double,      \
                                double);                                      \
  template TensorPtrT<T> reduce(TapeT<T>*, const TensorPtrT<T>&, int,         \
                                Reduce);                                      \
  template TensorPtrT<T> softmax_cross_entropy(TapeT<T>*,                     \
                                               const TensorPtrT<T>&,          \
                                               const std::vector<int>&);      \
  template TensorPtrT<T> batchnorm(TapeT<T>*, const TensorPtrT<T>&,           \
                                   const TensorPtrT<T>&,                      \
                                   const TensorPtrT<T>&,                      \
                                   const TensorPtrT<T>&,                      \
                                   const TensorPtrT<T>&, bool, double,        \
                                   double);                                   \
  template TensorPtrT<T> reshape(TapeT<T>*, const TensorPtrT<T>&, Shape);     \
  template TensorPtrT<T> time_slice(TapeT<T>*, const TensorPtrT<T>&,          \
                                    int64_t);                                 \
  template TensorPtrT<T> lde_encode(TapeT<T>*, const TensorPtrT<T>&,          \
                                    const TensorPtrT<T>&,                     \
                                    const TensorPtrT<T>&, bool);              \
  template std::vector<double> log_softmax_row(const TensorT<T>&, int64_t);

ULID_INSTANTIATE_OPS(float)
ULID_INSTANTIATE_OPS(double)

#undef ULID_INSTANTIATE_OPS

}  // namespace ulid
