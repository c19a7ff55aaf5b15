// src/encoders.cc

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

#include "ulid/encoders.h"

namespace ulid {

std::string encoder_kind_name(EncoderKind kind) {
  switch (kind) {
    case EncoderKind::kTap: return "tap";
    case EncoderKind::kGru: return "gru";
    case EncoderKind::kLstm: return "lstm";
    case EncoderKind::kLde: return "lde";
  }
  return "?";
}

EncoderKind parse_encoder_kind(const std::string& name) {
  if (name == "tap") return EncoderKind::kTap;
  if (name == "gru") return EncoderKind::kGru;
  if (name == "lstm") return EncoderKind::kLstm;
  if (name == "lde") return EncoderKind::kLde;
  ULID_ERR << "unknown encoder '" << name
           << "' (valid encoders: tap, gru, lstm, lde)";
}

void EncoderSpec::validate() const {
  ULID_CHECK(d_in >= 1) << "encoder d_in must be >= 1";
  ULID_CHECK(components >= 1) << "encoder components must be >= 1";
  ULID_CHECK(layers >= 1) << "encoder layers must be >= 1";
}

template <typename T>
void Encoder<T>::init(const EncoderSpec& s, Rng& rng) {
  s.validate();
  spec = s;
  gru.clear();
  lstm.clear();
  switch (s.kind) {
    case EncoderKind::kTap:
      break;
    case EncoderKind::kGru:
      gru.resize(s.layers);
      for (auto& l : gru) l.init(s.d_in, s.d_in, rng);
      break;
    case EncoderKind::kLstm:
      lstm.resize(s.layers);
      for (auto& l : lstm) l.init(s.d_in, s.d_in, rng);
      break;
    case EncoderKind::kLde:
      lde.init(s.components, s.d_in, rng);
      lde.mass_norm = s.lde_mass_norm;
      break;
  }
}

template <typename T>
TensorPtrT<T> Encoder<T>::forward(TapeT<T>* tape,
                                  const TensorPtrT<T>& x) const {
  ULID_CHECK(x->rank() == 3 && x->dim(1) == spec.d_in)
      << "encoder expects [B, " << spec.d_in << ", L], got "
      << shape_str(x->shape());
  const int64_t batch = x->dim(0), len = x->dim(2);
  switch (spec.kind) {
    case EncoderKind::kTap:
      return reduce(tape, x, 2, Reduce::kMean);
    case EncoderKind::kGru: {
      std::vector<TensorPtrT<T>> h(gru.size());
      for (auto& s : h) s = make_tensor<T>(Shape{batch, spec.d_in}, true);
      for (int64_t t = 0; t < len; ++t) {
        TensorPtrT<T> in = time_slice(tape, x, t);
        for (size_t l = 0; l < gru.size(); ++l) {
          h[l] = gru[l].step(tape, in, h[l]);
          in = h[l];
        }
      }
      return h.back();
    }
    case EncoderKind::kLstm: {
      std::vector<TensorPtrT<T>> h(lstm.size()), c(lstm.size());
      for (auto& s : h) s = make_tensor<T>(Shape{batch, spec.d_in}, true);
      for (auto& s : c) s = make_tensor<T>(Shape{batch, spec.d_in}, true);
      for (int64_t t = 0; t < len; ++t) {
        TensorPtrT<T> in = time_slice(tape, x, t);
        for (size_t l = 0; l < lstm.size(); ++l) {
          auto [hn, cn] = lstm[l].step(tape, in, h[l], c[l]);
          h[l] = hn;
          c[l] = cn;
          in = h[l];
        }
      }
      return h.back();
    }
    case EncoderKind::kLde:
      return lde.forward(tape, x);
  }
  ULID_ERR << "unreachable encoder kind";
}

template <typename T>
void Encoder<T>::collect(const std::string& prefix, TensorEntries<T>* out) {
  switch (spec.kind) {
    case EncoderKind::kTap:
      break;
    case EncoderKind::kGru:
      for (size_t i = 0; i < gru.size(); ++i) {
        gru[i].collect(prefix + ".gru" + std::to_string(i), out);
      }
      break;
    case EncoderKind::kLstm:
      for (size_t i = 0; i < lstm.size(); ++i) {
        lstm[i].collect(prefix + ".lstm" + std::to_string(i), out);
      }
      break;
    case EncoderKind::kLde:
      lde.collect(prefix + ".lde", out);
      break;
  }
}

template struct Encoder<float>;
template struct Encoder<double>;

}  // namespace ulid
