// src/backbone.cc

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

#include "ulid/backbone.h"

#include <sstream>

namespace ulid {

namespace {

int64_t conv_out(int64_t in, int64_t k, int64_t s, int64_t p) {
  return (in + 2 * p - k) / s + 1;
}

// Expanded main-path conv sequence: plain stage -> one conv, residual stage
// -> stride conv plus a stride-1 conv.
struct FlatConv {
  int64_t kh, kw, sh, sw, ph, pw;
};

std::vector<FlatConv> flatten(const ConvStackSpec& spec) {
  std::vector<FlatConv> out;
  for (const auto& l : spec.layers) {
    out.push_back({l.kh, l.kw, l.sh, l.sw, l.ph, l.pw});
    if (l.residual) out.push_back({l.kh, l.kw, 1, 1, l.ph, l.pw});
  }
  return out;
}

}  // namespace

int64_t ConvStackSpec::final_dim() const {
  ULID_CHECK(!layers.empty()) << "conv spec has no layers";
  return layers.back().channels;
}

void ConvStackSpec::validate() const {
  ULID_CHECK(!layers.empty()) << "conv spec has no layers";
  for (size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    ULID_CHECK(l.channels >= 1) << "layer " << i << ": channels must be >= 1";
    ULID_CHECK(l.kh >= 1 && l.kw >= 1) << "layer " << i << ": bad kernel";
    ULID_CHECK(l.sh >= 1 && l.sw >= 1) << "layer " << i << ": bad stride";
    ULID_CHECK(l.ph >= 0 && l.pw >= 0) << "layer " << i << ": bad padding";
    if (l.residual) {
      // The stride-1 second conv must preserve extents for the shortcut add.
      if (2 * l.ph != l.kh - 1 || 2 * l.pw != l.kw - 1) {
        ULID_ERR << "layer " << i
                 << ": residual stages need odd kernels with pad (k-1)/2";
      }
    }
  }
}

int64_t ConvStackSpec::output_len(int64_t len) const {
  for (const auto& c : flatten(*this)) {
    len = conv_out(len, c.kw, c.sw, c.pw);
    if (len < 1) return len;
  }
  return len;
}

int64_t ConvStackSpec::freq_extent(int64_t freq) const {
  for (const auto& c : flatten(*this)) {
    freq = conv_out(freq, c.kh, c.sh, c.ph);
    if (freq < 1) return freq;
  }
  return freq;
}

int64_t ConvStackSpec::time_jump() const {
  int64_t j = 1;
  for (const auto& l : layers) j *= l.sw;
  return j;
}

std::string ConvStackSpec::to_string() const {
  std::ostringstream os;
  for (size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (i) os << "; ";
    os << "c" << l.channels << " k" << l.kh << "x" << l.kw << " s" << l.sh
       << "x" << l.sw << " p" << l.ph << "x" << l.pw;
    if (l.residual) os << " res";
  }
  return os.str();
}

ConvStackSpec ConvStackSpec::parse(const std::string& text) {
  ConvStackSpec spec;
  size_t pos = 0;
  const auto fail = [&](size_t at, const std::string& why) {
    ULID_ERR << "conv spec parse error at position " << at << ": " << why
             << " (in \"" << text << "\")";
  };
  const auto parse_pair = [&](const std::string& tok, size_t at, int64_t* a,
                              int64_t* b) {
    const size_t x = tok.find('x');
    if (x == std::string::npos) fail(at, "expected <n>x<m> in '" + tok + "'");
    try {
      *a = std::stoll(tok.substr(0, x));
      *b = std::stoll(tok.substr(x + 1));
    } catch (const std::exception&) {
      fail(at, "bad number in '" + tok + "'");
    }
  };
  while (pos < text.size()) {
    size_t end = text.find(';', pos);
    if (end == std::string::npos) end = text.size();
    std::string item = text.substr(pos, end - pos);
    std::istringstream ls(item);
    std::string tok;
    ConvLayerSpec layer;
    bool saw_channels = false;
    while (ls >> tok) {
      const size_t at = pos + static_cast<size_t>(ls.tellg() == -1
                                                      ? (int64_t)item.size()
                                                      : (int64_t)ls.tellg());
      if (tok == "res") {
        layer.residual = true;
      } else if (tok[0] == 'c') {
        try {
          layer.channels = std::stoll(tok.substr(1));
        } catch (const std::exception&) {
          fail(at, "bad channel count '" + tok + "'");
        }
        saw_channels = true;
      } else if (tok[0] == 'k') {
        parse_pair(tok.substr(1), at, &layer.kh, &layer.kw);
      } else if (tok[0] == 's') {
        parse_pair(tok.substr(1), at, &layer.sh, &layer.sw);
      } else if (tok[0] == 'p') {
        parse_pair(tok.substr(1), at, &layer.ph, &layer.pw);
      } else {
        fail(at, "unknown token '" + tok + "'");
      }
    }
    if (!saw_channels && !item.empty()) {
      fail(pos, "layer needs a channel count ('c<n>')");
    }
    if (saw_channels) spec.layers.push_back(layer);
    pos = end + 1;
  }
  spec.validate();
  return spec;
}

ConvStackSpec ConvStackSpec::desk_default() {
  ConvStackSpec spec;
  spec.layers.push_back({16, 3, 3, 1, 1, 1, 1, false});
  spec.layers.push_back({16, 3, 3, 2, 2, 1, 1, true});
  spec.layers.push_back({32, 3, 3, 2, 2, 1, 1, true});
  spec.layers.push_back({64, 3, 3, 2, 2, 1, 1, true});
  spec.layers.push_back({128, 3, 3, 2, 2, 1, 1, true});
  return spec;
}

ConvStackSpec ConvStackSpec::toy_example() {
  ConvStackSpec spec;
  for (int i = 0; i < 5; ++i) {
    spec.layers.push_back({64, 3, 3, 2, 2, 1, 1, false});
  }
  return spec;
}

std::vector<RfRow> receptive_field(const ConvStackSpec& spec, int64_t freq,
                                   int64_t len) {
  spec.validate();
  std::vector<RfRow> rows;
  int64_t rf_h = 1, rf_w = 1, jump_h = 1, jump_w = 1;
  int64_t h = freq, w = len;
  int conv_idx = 0;
  for (const auto& c : flatten(spec)) {
    RfRow row;
    row.name = "conv" + std::to_string(++conv_idx);
    row.k = c.kw;
    row.s = c.sw;
    rf_h = rf_h + (c.kh - 1) * jump_h;
    rf_w = rf_w + (c.kw - 1) * jump_w;
    row.rf_h = rf_h;
    row.rf_w = rf_w;
    jump_h *= c.sh;
    jump_w *= c.sw;
    row.jump_h = jump_h;
    row.jump_w = jump_w;
    h = conv_out(h, c.kh, c.sh, c.ph);
    w = conv_out(w, c.kw, c.sw, c.pw);
    row.out_h = h;
    row.out_w = w;
    rows.push_back(row);
  }
  return rows;
}

template <typename T>
void Backbone<T>::init(const ConvStackSpec& s, Rng& rng) {
  s.validate();
  const int64_t freq_left = s.freq_extent(64);
  if (freq_left < 1) {
    ULID_ERR << "conv spec collapses the frequency axis below 1 (got "
             << freq_left << " from 64 input bins)";
  }
  spec = s;
  stages.clear();
  stages.resize(s.layers.size());
  int64_t cin = 1;
  for (size_t i = 0; i < s.layers.size(); ++i) {
    const auto& l = s.layers[i];
    auto& st = stages[i];
    st.residual = l.residual;
    if (l.residual) {
      st.block.init(cin, l.channels, l.kh, l.kw, l.sh, l.sw, l.ph, l.pw, rng);
    } else {
      st.conv.init(l.channels, cin, l.kh, l.kw, l.sh, l.sw, l.ph, l.pw, rng);
      st.bn.init(l.channels);
    }
    cin = l.channels;
  }
}

template <typename T>
TensorPtrT<T> Backbone<T>::forward(TapeT<T>* tape, const TensorPtrT<T>& x,
                                   bool training) const {
  ULID_CHECK(x->rank() == 4 && x->dim(1) == 1)
      << "backbone expects [B, 1, F, L] input, got " << shape_str(x->shape());
  const int64_t len = x->dim(3);
  if (len < min_len()) {
    ULID_ERR << "input has " << len << " frames; the backbone needs at least "
             << min_len();
  }
  TensorPtrT<T> h = x;
  for (const auto& st : stages) {
    if (st.residual) {
      h = st.block.forward(tape, h, training);
    } else {
      h = relu(tape, st.bn.forward(tape, st.conv.forward(tape, h), training));
    }
  }
  // Mean-pool the remaining frequency bins: [B,C,F',L'] -> [B,C,L'].
  return reduce(tape, h, 2, Reduce::kMean);
}

template <typename T>
void Backbone<T>::collect(const std::string& prefix, TensorEntries<T>* out) {
  for (size_t i = 0; i < stages.size(); ++i) {
    const std::string name = prefix + ".stage" + std::to_string(i);
    if (stages[i].residual) {
      stages[i].block.collect(name, out);
    } else {
      stages[i].conv.collect(name + ".conv", out);
      stages[i].bn.collect(name + ".bn", out);
    }
  }
}

template struct Backbone<float>;
template struct Backbone<double>;

}  // namespace ulid
