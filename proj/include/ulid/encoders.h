// include/ulid/encoders.h

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

#ifndef ULID_ENCODERS_H_
#define ULID_ENCODERS_H_

#include <string>
#include <vector>

#include "ulid/nn.h"

namespace ulid {

enum class EncoderKind { kTap, kGru, kLstm, kLde };

std::string encoder_kind_name(EncoderKind kind);
// Accepts tap|gru|lstm|lde; anything else errors listing the valid names.
EncoderKind parse_encoder_kind(const std::string& name);

struct EncoderSpec {
  EncoderKind kind = EncoderKind::kTap;
  int64_t d_in = 128;
  int64_t components = 64;  // LDE dictionary size
  int64_t layers = 2;       // recurrent stack depth
  bool lde_mass_norm = false;

  // Recurrent hidden width equals d_in; encoding length is duration-free.
  int64_t output_dim() const {
    return kind == EncoderKind::kLde ? d_in * components : d_in;
  }
  void validate() const;
};

// One interface, interchangeable implementations: maps a [B, D_in, L] feature
// sequence (any L >= 1) to a fixed [B, D_enc] utterance encoding.
template <typename T>
struct Encoder {
  EncoderSpec spec;
  std::vector<GruLayer<T>> gru;
  std::vector<LstmLayer<T>> lstm;
  LdeLayer<T> lde;

  void init(const EncoderSpec& s, Rng& rng);
  TensorPtrT<T> forward(TapeT<T>* tape, const TensorPtrT<T>& x) const;
  void collect(const std::string& prefix, TensorEntries<T>* out);
};

}  // namespace ulid

#endif  // ULID_ENCODERS_H_
