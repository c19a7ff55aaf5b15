// src/config.cc

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

#include "ulid/config.h"

#include <fstream>
#include <sstream>

#include "ulid/backbone.h"
#include "ulid/encoders.h"
#include "ulid/io_util.h"

namespace ulid {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

int64_t to_i64(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const int64_t x = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    ULID_ERR << "config key " << key << ": '" << v << "' is not an integer";
  }
}

double to_f64(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    ULID_ERR << "config key " << key << ": '" << v << "' is not a number";
  }
}

template <typename T, typename F>
std::vector<T> to_list(const std::string& key, const std::string& v, F conv) {
  std::vector<T> out;
  std::string item;
  std::istringstream is(v);
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(conv(key, item));
  }
  if (out.empty()) ULID_ERR << "config key " << key << ": empty list";
  return out;
}

}  // namespace

RunConfig::RunConfig() {
  conv_spec = ConvStackSpec::desk_default().to_string();
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (key == "seed") {
    seed = static_cast<uint64_t>(to_i64(key, v));
    train.seed = seed;
    synth.seed = seed;
  } else if (key == "workers") {
    workers = static_cast<int>(to_i64(key, v));
  } else if (key == "frontend.vad_threshold_db") {
    frontend.vad_threshold_db = to_f64(key, v);
  } else if (key == "frontend.cmn_window") {
    frontend.cmn_window = to_i64(key, v);
  } else if (key == "conv.spec") {
    ConvStackSpec::parse(v);  // validate now, fail early
    conv_spec = v;
  } else if (key == "encoder.kind") {
    parse_encoder_kind(v);
    encoder_kind = v;
  } else if (key == "encoder.components") {
    encoder_components = to_i64(key, v);
  } else if (key == "encoder.layers") {
    encoder_layers = to_i64(key, v);
  } else if (key == "encoder.lde_norm") {
    if (v != "length" && v != "mass") {
      ULID_ERR << "encoder.lde_norm must be 'length' or 'mass', got '" << v
               << "'";
    }
    encoder_lde_norm = v;
  } else if (key == "train.epochs") {
    train.epochs = to_i64(key, v);
  } else if (key == "train.lr0") {
    train.lr0 = to_f64(key, v);
  } else if (key == "train.decay_epochs") {
    train.decay_epochs = to_list<int64_t>(key, v, to_i64);
  } else if (key == "train.decay_divisors") {
    train.decay_divisors = to_list<double>(key, v, to_f64);
  } else if (key == "train.batch_size") {
    train.batch_size = to_i64(key, v);
  } else if (key == "train.crop_min") {
    train.crop_min = to_i64(key, v);
  } else if (key == "train.crop_max") {
    train.crop_max = to_i64(key, v);
  } else if (key == "train.momentum") {
    train.momentum = to_f64(key, v);
  } else if (key == "train.weight_decay") {
    train.weight_decay = to_f64(key, v);
  } else if (key == "train.checkpoint_every") {
    train.checkpoint_every = to_i64(key, v);
  } else if (key == "synth.langs") {
    synth.n_langs = static_cast<int>(to_i64(key, v));
  } else if (key == "synth.train_per_lang") {
    synth.train_per_lang = static_cast<int>(to_i64(key, v));
  } else if (key == "synth.test_per_lang") {
    synth.test_per_lang = static_cast<int>(to_i64(key, v));
  } else if (key == "synth.durations") {
    synth.test_durations = to_list<double>(key, v, to_f64);
  } else if (key == "synth.sample_rate") {
    synth.sample_rate = static_cast<int>(to_i64(key, v));
  } else if (key == "paths.train_manifest") {
    train_manifest = v;
  } else if (key == "paths.test_manifest") {
    test_manifest = v;
  } else if (key == "paths.features") {
    features_dir = v;
  } else if (key == "paths.checkpoint") {
    checkpoint_path = v;
  } else if (key == "paths.log") {
    log_path = v;
  } else if (key == "paths.scores") {
    scores_path = v;
  } else if (key == "paths.out") {
    out_dir = v;
  } else {
    ULID_ERR << "unknown config key '" << key << "'";
  }
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) ULID_ERR << "cannot open config file " << path;
  RunConfig cfg;
  std::string line;
  int64_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const size_t eq = t.find('=');
    if (eq == std::string::npos) {
      ULID_ERR << path << ":" << line_no << ": expected 'key = value'";
    }
    try {
      cfg.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    } catch (const Error& e) {
      ULID_ERR << path << ":" << line_no << ": " << e.what();
    }
  }
  return cfg;
}

std::string RunConfig::normalized() const {
  std::ostringstream os;
  os << "conv.spec = " << conv_spec << "\n";
  os << "encoder.components = " << encoder_components << "\n";
  os << "encoder.kind = " << encoder_kind << "\n";
  os << "encoder.layers = " << encoder_layers << "\n";
  os << "encoder.lde_norm = " << encoder_lde_norm << "\n";
  os << "frontend.cmn_window = " << frontend.cmn_window << "\n";
  os << "frontend.vad_threshold_db = " << frontend.vad_threshold_db << "\n";
  os << "seed = " << seed << "\n";
  os << "train.batch_size = " << train.batch_size << "\n";
  os << "train.crop_max = " << train.crop_max << "\n";
  os << "train.crop_min = " << train.crop_min << "\n";
  std::ostringstream de, dd;
  for (size_t i = 0; i < train.decay_epochs.size(); ++i) {
    if (i) de << ",";
    de << train.decay_epochs[i];
  }
  for (size_t i = 0; i < train.decay_divisors.size(); ++i) {
    if (i) dd << ",";
    dd << train.decay_divisors[i];
  }
  os << "train.decay_divisors = " << dd.str() << "\n";
  os << "train.decay_epochs = " << de.str() << "\n";
  os << "train.epochs = " << train.epochs << "\n";
  os << "train.lr0 = " << train.lr0 << "\n";
  os << "train.momentum = " << train.momentum << "\n";
  os << "train.weight_decay = " << train.weight_decay << "\n";
  return os.str();
}

std::string RunConfig::hash() const { return fnv1a_hex(normalized()); }

ConvStackSpec RunConfig::conv() const { return ConvStackSpec::parse(conv_spec); }

EncoderSpec RunConfig::encoder() const {
  EncoderSpec spec;
  spec.kind = parse_encoder_kind(encoder_kind);
  spec.d_in = conv().final_dim();
  spec.components = encoder_components;
  spec.layers = encoder_layers;
  spec.lde_mass_norm = encoder_lde_norm == "mass";
  return spec;
}

}  // namespace ulid
