// src/model.cc

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

#include "ulid/model.h"

#include <bit>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "ulid/io_util.h"

namespace ulid {

using nlohmann::json;

void ModelSpec::validate() const {
  conv.validate();
  encoder.validate();
  ULID_CHECK(encoder.d_in == conv.final_dim())
      << "encoder d_in " << encoder.d_in << " must equal the conv stack's "
      << "final feature dim " << conv.final_dim();
  ULID_CHECK(n_classes() >= 2) << "need at least 2 classes, got "
                               << n_classes();
}

std::string ModelSpec::to_json() const {
  json j;
  j["conv"] = conv.to_string();
  j["encoder"] = {{"kind", encoder_kind_name(encoder.kind)},
                  {"d_in", encoder.d_in},
                  {"components", encoder.components},
                  {"layers", encoder.layers},
                  {"lde_norm", encoder.lde_mass_norm ? "mass" : "length"}};
  j["classes"] = class_names;
  j["seed"] = seed;
  return j.dump();
}

ModelSpec ModelSpec::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    ULID_ERR << "bad model spec JSON: " << e.what();
  }
  ModelSpec spec;
  try {
    spec.conv = ConvStackSpec::parse(j.at("conv").get<std::string>());
    const auto& e = j.at("encoder");
    spec.encoder.kind = parse_encoder_kind(e.at("kind").get<std::string>());
    spec.encoder.d_in = e.at("d_in").get<int64_t>();
    spec.encoder.components = e.at("components").get<int64_t>();
    spec.encoder.layers = e.at("layers").get<int64_t>();
    spec.encoder.lde_mass_norm = e.at("lde_norm").get<std::string>() == "mass";
    spec.class_names = j.at("classes").get<std::vector<std::string>>();
    spec.seed = j.at("seed").get<uint64_t>();
  } catch (const json::exception& e) {
    ULID_ERR << "model spec JSON missing fields: " << e.what();
  }
  spec.validate();
  return spec;
}

template <typename T>
void Model<T>::init(const ModelSpec& s) {
  s.validate();
  spec = s;
  Rng rng(s.seed);
  backbone.init(s.conv, rng);
  encoder.init(s.encoder, rng);
  // Small head init keeps a fresh model's posteriors near uniform.
  const double std =
      0.5 / std::sqrt(static_cast<double>(s.encoder.output_dim()));
  fc.init(s.encoder.output_dim(), s.n_classes(), std, rng);
}

template <typename T>
TensorPtrT<T> Model<T>::forward_logits(TapeT<T>* tape, const TensorPtrT<T>& x,
                                       bool training) const {
  auto feats = backbone.forward(tape, x, training);
  auto enc = encoder.forward(tape, feats);
  return fc.forward(tape, enc);
}

template <typename T>
std::vector<double> Model<T>::classify(const FeatureSequence& f) const {
  ULID_CHECK(f.dim == 64) << "classify expects 64-dim features, got " << f.dim;
  if (f.frames < backbone.min_len()) {
    ULID_ERR << "utterance has " << f.frames
             << " frames; the backbone needs at least " << backbone.min_len();
  }
  auto x = make_tensor<T>(Shape{1, 1, f.dim, f.frames}, false);
  for (int64_t i = 0; i < f.dim * f.frames; ++i) {
    x->at(i) = static_cast<T>(f.data[i]);
  }
  auto logits = forward_logits(nullptr, x, /*training=*/false);
  return log_softmax_row(*logits, 0);
}

template <typename T>
TensorEntries<T> Model<T>::tensors() {
  TensorEntries<T> out;
  backbone.collect("backbone", &out);
  encoder.collect("encoder", &out);
  fc.collect("fc", &out);
  return out;
}

template struct Model<float>;
template struct Model<double>;

namespace {

void wr_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF),
                        static_cast<unsigned char>((v >> 8) & 0xFF),
                        static_cast<unsigned char>((v >> 16) & 0xFF),
                        static_cast<unsigned char>((v >> 24) & 0xFF)};
  os.write(reinterpret_cast<char*>(b), 4);
}

uint32_t rd_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) ULID_ERR << "truncated checkpoint";
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) |
         (static_cast<uint32_t>(b[3]) << 24);
}

constexpr int kCheckpointVersion = 1;

}  // namespace

void save_checkpoint(Model<float>& model, const std::string& path,
                     const CheckpointMeta& meta) {
  auto entries = model.tensors();
  atomic_write(path, [&](std::ostream& os) {
    json header;
    header["format"] = "ulid-checkpoint";
    header["version"] = kCheckpointVersion;
    header["epoch"] = meta.epoch;
    header["config_hash"] = meta.config_hash;
    header["model_spec"] = json::parse(model.spec.to_json());
    os << header.dump() << "\n";
    wr_u32(os, static_cast<uint32_t>(entries.size()));
    for (const auto& e : entries) {
      wr_u32(os, static_cast<uint32_t>(e.name.size()));
      os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
      wr_u32(os, static_cast<uint32_t>(e.value->rank()));
      for (int i = 0; i < e.value->rank(); ++i) {
        wr_u32(os, static_cast<uint32_t>(e.value->dim(i)));
      }
      for (int64_t i = 0; i < e.value->numel(); ++i) {
        wr_u32(os, std::bit_cast<uint32_t>(e.value->at(i)));
      }
    }
  });
}

Model<float> load_checkpoint(const std::string& path, CheckpointMeta* meta) {
  std::ifstream is(path, std::ios::binary);
  if (!is) ULID_ERR << "cannot open checkpoint " << path;
  std::string header_line;
  if (!std::getline(is, header_line)) {
    ULID_ERR << "truncated checkpoint " << path << " (no header)";
  }
  json header;
  try {
    header = json::parse(header_line);
  } catch (const json::exception&) {
    ULID_ERR << path << " is not a ulid checkpoint";
  }
  if (header.value("format", "") != "ulid-checkpoint") {
    ULID_ERR << path << " is not a ulid checkpoint";
  }
  const int version = header.value("version", -1);
  if (version != kCheckpointVersion) {
    ULID_ERR << path << ": unsupported checkpoint version " << version
             << " (this build reads version " << kCheckpointVersion << ")";
  }

  Model<float> model;
  model.init(ModelSpec::from_json(header.at("model_spec").dump()));
  if (meta != nullptr) {
    meta->epoch = header.value("epoch", int64_t(0));
    meta->config_hash = header.value("config_hash", "");
  }

  auto entries = model.tensors();
  std::vector<uint8_t> filled(entries.size(), 0);
  const uint32_t n_records = rd_u32(is);
  for (uint32_t r = 0; r < n_records; ++r) {
    const uint32_t name_len = rd_u32(is);
    if (name_len > 4096) ULID_ERR << path << ": corrupt record name length";
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    if (!is) ULID_ERR << "truncated checkpoint " << path;
    const uint32_t rank = rd_u32(is);
    if (rank > 8) ULID_ERR << path << ": corrupt record rank";
    Shape shape(rank);
    for (uint32_t i = 0; i < rank; ++i) shape[i] = rd_u32(is);

    size_t idx = entries.size();
    for (size_t i = 0; i < entries.size(); ++i) {
      if (entries[i].name == name) {
        idx = i;
        break;
      }
    }
    if (idx == entries.size()) {
      ULID_ERR << path << ": checkpoint tensor '" << name
               << "' does not exist in the model built from its spec";
    }
    auto& dst = entries[idx].value;
    if (shape != dst->shape()) {
      ULID_ERR << path << ": shape mismatch for '" << name << "': file "
               << shape_str(shape) << " vs model " << shape_str(dst->shape());
    }
    for (int64_t i = 0; i < dst->numel(); ++i) {
      dst->at(i) = std::bit_cast<float>(rd_u32(is));
    }
    filled[idx] = 1;
  }
  for (size_t i = 0; i < entries.size(); ++i) {
    if (!filled[i]) {
      ULID_ERR << path << ": checkpoint is missing tensor '"
               << entries[i].name << "'";
    }
  }
  return model;
}

TensorPtrF batch_input(const std::vector<const FeatureSequence*>& feats) {
  ULID_CHECK(!feats.empty()) << "batch_input: empty batch";
  const int64_t dim = feats[0]->dim;
  const int64_t len = feats[0]->frames;
  for (const auto* f : feats) {
    ULID_CHECK(f->dim == dim && f->frames == len)
        << "batch_input: all crops must share one shape";
  }
  auto x = make_tensor<float>(
      Shape{static_cast<int64_t>(feats.size()), 1, dim, len}, false);
  for (size_t b = 0; b < feats.size(); ++b) {
    std::copy(feats[b]->data.begin(), feats[b]->data.end(),
              x->data() + static_cast<int64_t>(b) * dim * len);
  }
  return x;
}

}  // namespace ulid
