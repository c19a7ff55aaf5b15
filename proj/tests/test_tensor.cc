// tests/test_tensor.cc

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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "ulid/gradcheck.h"
#include "ulid/nn.h"
#include "ulid/ops.h"
#include "ulid/rng.h"
#include "ulid/tensor.h"

using namespace ulid;

namespace {

template <typename T>
TensorPtrT<T> random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  auto t = make_tensor<T>(shape, false);
  for (int64_t i = 0; i < t->numel(); ++i) {
    t->at(i) = static_cast<T>(rng.uniform(-scale, scale));
  }
  return t;
}

// Independent direct-convolution reference: six nested loops, fused
// multiply-adds over (cin, kh, kw) ascending, zero contributions from
// padding, bias added after the accumulation. This is what conv2d must
// reproduce bit for bit.
template <typename T>
std::vector<T> conv2d_naive(const TensorT<T>& x, const TensorT<T>& w,
                            const TensorT<T>& bias, int64_t sh, int64_t sw,
                            int64_t ph, int64_t pw) {
  const int64_t cin = x.dim(0), h = x.dim(1), ww = x.dim(2);
  const int64_t cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const int64_t oh = (h + 2 * ph - kh) / sh + 1;
  const int64_t ow = (ww + 2 * pw - kw) / sw + 1;
  std::vector<T> y(cout * oh * ow);
  for (int64_t co = 0; co < cout; ++co) {
    for (int64_t i = 0; i < oh; ++i) {
      for (int64_t j = 0; j < ow; ++j) {
        T acc = 0;
        for (int64_t ci = 0; ci < cin; ++ci) {
          for (int64_t ki = 0; ki < kh; ++ki) {
            for (int64_t kj = 0; kj < kw; ++kj) {
              const int64_t ih = i * sh - ph + ki;
              const int64_t iw = j * sw - pw + kj;
              const T xv = (ih < 0 || ih >= h || iw < 0 || iw >= ww)
                               ? T(0)
                               : x.at((ci * h + ih) * ww + iw);
              acc = std::fma(w.at(((co * cin + ci) * kh + ki) * kw + kj), xv,
                             acc);
            }
          }
        }
        y[(co * oh + i) * ow + j] = acc + bias.at(co);
      }
    }
  }
  return y;
}

}  // namespace

TEST_CASE("matmul identity and hand-computed cases") {
  auto eye = make_tensor<double>(Shape{2, 2}, {1, 0, 0, 1});
  auto a = make_tensor<double>(Shape{2, 2}, {1, 2, 3, 4});
  auto c = matmul<double>(nullptr, eye, a);
  CHECK(c->to_vector() == std::vector<double>{1, 2, 3, 4});

  auto row = make_tensor<double>(Shape{1, 2}, {1, 2});
  auto col = make_tensor<double>(Shape{2, 1}, {3, 4});
  auto prod = matmul<double>(nullptr, row, col);
  CHECK(prod->numel() == 1);
  CHECK(prod->at(0) == doctest::Approx(11.0).epsilon(1e-12));
}

TEST_CASE("matmul rejects mismatched inner extents") {
  auto a = make_tensor<double>(Shape{2, 3}, true);
  auto b = make_tensor<double>(Shape{4, 2}, true);
  CHECK_THROWS_AS(matmul<double>(nullptr, a, b), Error);
}

TEST_CASE("matmul gradients match central finite differences") {
  Rng rng(42);
  auto a = random_tensor<double>({4, 5}, rng);
  auto b = random_tensor<double>({5, 3}, rng);
  auto r = random_tensor<double>({4, 3}, rng);  // fixed projection weights
  auto loss_fn = [&](TapeD* tape) {
    auto c = matmul(tape, a, b);
    return reduce(tape, reduce(tape, mul(tape, c, r), 1, Reduce::kSum), 0,
                  Reduce::kSum);
  };
  auto report = check_gradients(loss_fn, {{"a", a}, {"b", b}}, 1e-5, 1e-6);
  INFO(report.summary());
  CHECK(report.pass());
  CHECK(report.n_checked == 35);
}

TEST_CASE("conv2d identity kernel") {
  auto x = make_tensor<double>(Shape{1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  auto w = make_tensor<double>(Shape{1, 1, 1, 1}, {1});
  auto b = make_tensor<double>(Shape{1}, {0});
  auto y = conv2d<double>(nullptr, x, w, b, {1, 1, 1, 1, 0, 0});
  CHECK(y->shape() == Shape{1, 3, 3});
  CHECK(y->to_vector() == x->to_vector());
}

TEST_CASE("conv2d counting kernel") {
  auto x = make_tensor<double>(Shape{1, 4, 4}, true);
  for (int64_t i = 0; i < 16; ++i) x->at(i) = 1.0;
  auto w = make_tensor<double>(Shape{1, 1, 3, 3}, true);
  for (int64_t i = 0; i < 9; ++i) w->at(i) = 1.0;
  auto b = make_tensor<double>(Shape{1}, {0});
  auto y = conv2d<double>(nullptr, x, w, b, {3, 3, 1, 1, 0, 0});
  CHECK(y->shape() == Shape{1, 2, 2});
  for (int64_t i = 0; i < 4; ++i) CHECK(y->at(i) == 9.0);
}

TEST_CASE("conv2d equals the direct-loop reference bit for bit") {
  Rng rng(7);
  SUBCASE("spec case: 2x8x8 input, 4 kernels 3x3 stride 2") {
    auto x = random_tensor<double>({2, 8, 8}, rng);
    auto w = random_tensor<double>({4, 2, 3, 3}, rng);
    auto b = random_tensor<double>({4}, rng);
    auto y = conv2d<double>(nullptr, x, w, b, {3, 3, 2, 2, 0, 0});
    auto ref = conv2d_naive(*x, *w, *b, 2, 2, 0, 0);
    REQUIRE(y->numel() == static_cast<int64_t>(ref.size()));
    for (size_t i = 0; i < ref.size(); ++i) CHECK(y->at(i) == ref[i]);
  }
  SUBCASE("random shapes up to 4x16x16, with padding and stride") {
    for (int trial = 0; trial < 20; ++trial) {
      const int64_t cin = rng.uniform_int(1, 4);
      const int64_t h = rng.uniform_int(5, 16), wdt = rng.uniform_int(5, 16);
      const int64_t cout = rng.uniform_int(1, 5);
      const int64_t k = rng.uniform_int(1, 3);
      const int64_t s = rng.uniform_int(1, 2);
      const int64_t p = rng.uniform_int(0, 1);
      auto x = random_tensor<double>({cin, h, wdt}, rng);
      auto w = random_tensor<double>({cout, cin, k, k}, rng);
      auto b = random_tensor<double>({cout}, rng);
      auto y = conv2d<double>(nullptr, x, w, b, {k, k, s, s, p, p});
      auto ref = conv2d_naive(*x, *w, *b, s, s, p, p);
      REQUIRE(y->numel() == static_cast<int64_t>(ref.size()));
      for (size_t i = 0; i < ref.size(); ++i) {
        REQUIRE(y->at(i) == ref[i]);
      }
    }
  }
  SUBCASE("float path matches its own scalar chain too") {
    auto x = random_tensor<float>({3, 10, 12}, rng);
    auto w = random_tensor<float>({5, 3, 3, 3}, rng);
    auto b = random_tensor<float>({5}, rng);
    auto y = conv2d<float>(nullptr, x, w, b, {3, 3, 2, 2, 1, 1});
    auto ref = conv2d_naive(*x, *w, *b, 2, 2, 1, 1);
    for (size_t i = 0; i < ref.size(); ++i) REQUIRE(y->at(i) == ref[i]);
  }
}

TEST_CASE("conv2d names the offending axis when output collapses") {
  auto x = make_tensor<double>(Shape{1, 3, 8}, true);
  auto w = make_tensor<double>(Shape{1, 1, 5, 1}, true);
  try {
    conv2d<double>(nullptr, x, w, nullptr, {5, 1, 1, 1, 0, 0});
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("axis H") != std::string::npos);
  }
}

TEST_CASE("conv2d gradients match finite differences") {
  Rng rng(11);
  auto x = random_tensor<double>({2, 6, 7}, rng);
  auto w = random_tensor<double>({3, 2, 3, 3}, rng);
  auto b = random_tensor<double>({3}, rng);
  auto r = random_tensor<double>({1}, rng);
  auto loss_fn = [&](TapeD* tape) {
    auto y = conv2d(tape, x, w, b, {3, 3, 2, 2, 1, 1});
    auto flat = reshape(tape, y, {1, y->numel()});
    return reduce(tape, reduce(tape, flat, 1, Reduce::kSum), 0, Reduce::kSum);
  };
  auto report = check_gradients(loss_fn, {{"x", x}, {"w", w}, {"b", b}}, 1e-5,
                                1e-6);
  INFO(report.summary());
  CHECK(report.pass());
}

TEST_CASE("elementwise forward values") {
  auto x = make_tensor<double>(Shape{3}, {-1, 0, 2});
  auto y = relu<double>(nullptr, x);
  CHECK(y->to_vector() == std::vector<double>{0, 0, 2});

  auto z = make_tensor<double>(Shape{1}, {0});
  CHECK(sigmoid_op<double>(nullptr, z)->at(0) == doctest::Approx(0.5));

  auto neg = make_tensor<double>(Shape{2}, {1e-3, -2.0});
  CHECK_THROWS_AS(log_op<double>(nullptr, neg), Error);
}

TEST_CASE("tanh gradient matches finite differences") {
  Rng rng(3);
  auto x = random_tensor<double>({2, 5}, rng, 2.0);
  auto r = random_tensor<double>({2, 5}, rng);
  auto loss_fn = [&](TapeD* tape) {
    auto y = mul(tape, tanh_op(tape, x), r);
    return reduce(tape, reduce(tape, y, 1, Reduce::kSum), 0, Reduce::kSum);
  };
  auto report = check_gradients(loss_fn, {{"x", x}}, 1e-5, 1e-6);
  INFO(report.summary());
  CHECK(report.pass());
}

TEST_CASE("binary broadcast along the channel axis") {
  auto x = make_tensor<double>(Shape{2, 3, 2}, true);
  for (int64_t i = 0; i < x->numel(); ++i) x->at(i) = i;
  auto bias = make_tensor<double>(Shape{3}, {10, 20, 30});
  auto y = add<double>(nullptr, x, bias);
  CHECK(y->at(0) == 10.0);   // b=0,c=0,i=0
  CHECK(y->at(2) == 22.0);   // c=1
  CHECK(y->at(5) == 35.0);   // c=2
  CHECK(y->at(6) == 16.0);   // b=1,c=0

  auto bad = make_tensor<double>(Shape{4}, true);
  CHECK_THROWS_AS(add<double>(nullptr, x, bad), Error);

  // gradient of broadcast bias: sum over broadcast positions
  Rng rng(5);
  auto r = random_tensor<double>({2, 3, 2}, rng);
  auto loss_fn = [&](TapeD* tape) {
    auto s = mul(tape, add(tape, x, bias), r);
    auto f = reshape(tape, s, {1, s->numel()});
    return reduce(tape, reduce(tape, f, 1, Reduce::kSum), 0, Reduce::kSum);
  };
  auto report = check_gradients(loss_fn, {{"bias", bias}}, 1e-5, 1e-6);
  INFO(report.summary());
  CHECK(report.pass());
}

TEST_CASE("gradient accumulation is additive across reuses") {
  auto x = make_tensor<double>(Shape{3}, {1, 2, 3});
  x->requires_grad = true;
  TapeD tape;
  // z = x*x + x -> dz/dx = 2x + 1, with x used three times.
  auto z = add(&tape, mul(&tape, x, x), x);
  auto loss = reduce(&tape, z, 0, Reduce::kSum);
  tape.backward_from(loss);
  CHECK(x->grad()[0] == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(x->grad()[1] == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(x->grad()[2] == doctest::Approx(7.0).epsilon(1e-15));

  // Reusing a tensor twice yields exactly the sum of the single-use grads.
  auto a = make_tensor<double>(Shape{2}, {0.5, -1.5});
  a->requires_grad = true;
  TapeD t2;
  auto sum2 = add(&t2, a, a);
  auto l2 = reduce(&t2, sum2, 0, Reduce::kSum);
  t2.backward_from(l2);
  CHECK(a->grad()[0] == 2.0);
  CHECK(a->grad()[1] == 2.0);
}

TEST_CASE("reduce examples") {
  auto x = make_tensor<double>(Shape{2, 2}, {1, 3, 5, 7});
  auto m = reduce<double>(nullptr, x, 1, Reduce::kMean);
  CHECK(m->to_vector() == std::vector<double>{2, 6});

  auto zeros = make_tensor<double>(Shape{3, 2}, true);
  auto s = reduce<double>(nullptr, zeros, 0, Reduce::kSum);
  CHECK(s->to_vector() == std::vector<double>{0, 0});

  // max backward routes to the first of tied maxima
  auto t = make_tensor<double>(Shape{3}, {3, 3, 1});
  t->requires_grad = true;
  TapeD tape;
  auto mx = reduce(&tape, t, 0, Reduce::kMax);
  tape.backward_from(mx);
  CHECK(t->grad()[0] == 1.0);
  CHECK(t->grad()[1] == 0.0);
  CHECK(t->grad()[2] == 0.0);
}

TEST_CASE("softmax cross entropy values and gradient") {
  SUBCASE("uniform logits, K=14") {
    auto logits = make_tensor<double>(Shape{2, 14}, true);
    auto loss =
        softmax_cross_entropy<double>(nullptr, logits, {0, 13});
    CHECK(loss->at(0) == doctest::Approx(std::log(14.0)).epsilon(1e-12));
  }
  SUBCASE("saturated true logit") {
    auto logits = make_tensor<double>(Shape{1, 5}, true);
    logits->at(2) = 1e4;
    auto loss = softmax_cross_entropy<double>(nullptr, logits, {2});
    CHECK(loss->at(0) == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("out-of-range label is rejected") {
    auto logits = make_tensor<double>(Shape{1, 5}, true);
    CHECK_THROWS_AS(softmax_cross_entropy<double>(nullptr, logits, {5}),
                    Error);
    CHECK_THROWS_AS(softmax_cross_entropy<double>(nullptr, logits, {-1}),
                    Error);
  }
  SUBCASE("gradient matches finite differences") {
    Rng rng(19);
    auto logits = random_tensor<double>({3, 5}, rng, 2.0);
    std::vector<int> labels = {1, 4, 0};
    auto loss_fn = [&](TapeD* tape) {
      return softmax_cross_entropy(tape, logits, labels);
    };
    auto report = check_gradients(loss_fn, {{"logits", logits}}, 1e-5, 1e-5);
    INFO(report.summary());
    CHECK(report.pass());
  }
}

TEST_CASE("check_gradients flags a corrupted backward rule") {
  auto x = make_tensor<double>(Shape{4}, {0.3, -0.7, 1.1, 0.2});
  auto loss_fn = [&](TapeD* tape) {
    auto out = make_tensor<double>(Shape{1}, false);
    double s = 0;
    for (int64_t i = 0; i < 4; ++i) s += x->at(i) * x->at(i);
    out->at(0) = s;
    if (tape != nullptr) {
      out->requires_grad = true;
      auto xl = x;
      // Deliberately wrong rule: d(sum x^2)/dx claimed as 3x, not 2x.
      tape->record([xl, out]() {
        for (int64_t i = 0; i < 4; ++i) {
          xl->grad()[i] += out->grad()[0] * 3.0 * xl->at(i);
        }
      });
    }
    return out;
  };
  auto report = check_gradients(loss_fn, {{"x", x}}, 1e-5, 1e-6);
  CHECK_FALSE(report.pass());
  CHECK(report.violations.size() == 4);
}

TEST_CASE("check_gradients passes a linear layer") {
  Rng rng(23);
  LinearLayer<double> lin;
  lin.init(6, 4, 0.3, rng);
  auto x = random_tensor<double>({3, 6}, rng);
  std::vector<int> labels = {0, 3, 2};
  auto loss_fn = [&](TapeD* tape) {
    return softmax_cross_entropy(tape, lin.forward(tape, x), labels);
  };
  auto report = check_gradients(
      loss_fn, {{"w", lin.w}, {"b", lin.b}, {"x", x}}, 1e-5, 1e-6);
  INFO(report.summary());
  CHECK(report.pass());
}

TEST_CASE("batchnorm responds to train/eval modes and checks gradients") {
  Rng rng(31);
  BatchNormLayer<double> bn;
  bn.init(3);
  auto x = random_tensor<double>({4, 3, 5}, rng, 2.0);

  SUBCASE("training mode normalizes to zero mean unit variance") {
    auto y = bn.forward(nullptr, x, true);
    for (int64_t c = 0; c < 3; ++c) {
      double s = 0, s2 = 0;
      for (int64_t b = 0; b < 4; ++b) {
        for (int64_t i = 0; i < 5; ++i) {
          const double v = y->at((b * 3 + c) * 5 + i);
          s += v;
          s2 += v * v;
        }
      }
      CHECK(s / 20 == doctest::Approx(0.0).epsilon(1e-9));
      // eps=1e-5 inside the normalizer leaves var/(var+eps) slightly under 1
      CHECK(s2 / 20 == doctest::Approx(1.0).epsilon(1e-4));
    }
  }
  SUBCASE("eval mode uses running statistics") {
    // Fresh layer: running stats are (0, 1), so eval is identity for
    // gamma=1, beta=0 up to eps.
    auto y = bn.forward(nullptr, x, false);
    for (int64_t i = 0; i < x->numel(); ++i) {
      CHECK(y->at(i) == doctest::Approx(x->at(i)).epsilon(1e-5));
    }
  }
  SUBCASE("training-mode gradients match finite differences") {
    auto r = random_tensor<double>({4, 3, 5}, rng);
    auto loss_fn = [&](TapeD* tape) {
      auto y = bn.forward(tape, x, true);
      auto f = reshape(tape, mul(tape, y, r), {1, y->numel()});
      return reduce(tape, reduce(tape, f, 1, Reduce::kSum), 0, Reduce::kSum);
    };
    auto report = check_gradients(
        loss_fn, {{"gamma", bn.gamma}, {"beta", bn.beta}, {"x", x}}, 1e-6,
        1e-6);
    INFO(report.summary());
    CHECK(report.pass());
  }
}

TEST_CASE("time_slice and reshape round trips") {
  auto x = make_tensor<double>(Shape{2, 3, 4}, true);
  for (int64_t i = 0; i < x->numel(); ++i) x->at(i) = i;
  auto s = time_slice<double>(nullptr, x, 2);
  CHECK(s->shape() == Shape{2, 3});
  CHECK(s->at(0) == x->at(2));
  CHECK(s->at(5) == x->at((1 * 3 + 2) * 4 + 2));

  auto r = reshape<double>(nullptr, x, {6, 4});
  CHECK(r->shape() == Shape{6, 4});
  CHECK(r->to_vector() == x->to_vector());
}
