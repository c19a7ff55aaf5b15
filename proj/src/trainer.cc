// src/trainer.cc

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

#include "ulid/trainer.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "ulid/io_util.h"
#include "ulid/ops.h"

namespace ulid {

void TrainConfig::validate(int64_t backbone_min_len) const {
  ULID_CHECK(epochs >= 1) << "epochs must be >= 1";
  ULID_CHECK(lr0 > 0) << "lr0 must be positive";
  ULID_CHECK(decay_epochs.size() == decay_divisors.size())
      << "decay epochs and divisors must pair up";
  for (size_t i = 0; i < decay_epochs.size(); ++i) {
    ULID_CHECK(decay_epochs[i] < epochs)
        << "decay epoch " << decay_epochs[i] << " must be < epochs " << epochs;
    ULID_CHECK(decay_divisors[i] > 0) << "decay divisor must be positive";
    if (i > 0) {
      ULID_CHECK(decay_epochs[i] > decay_epochs[i - 1])
          << "decay epochs must increase";
    }
  }
  ULID_CHECK(batch_size >= 1) << "batch_size must be >= 1";
  ULID_CHECK(crop_min <= crop_max) << "crop range is inverted";
  ULID_CHECK(crop_min >= backbone_min_len)
      << "crop_min " << crop_min << " is below the backbone minimum "
      << backbone_min_len;
}

double lr_schedule(const TrainConfig& cfg, int64_t epoch) {
  ULID_CHECK(epoch >= 0 && epoch < cfg.epochs)
      << "epoch " << epoch << " outside [0, " << cfg.epochs << ")";
  double lr = cfg.lr0;
  for (size_t i = 0; i < cfg.decay_epochs.size(); ++i) {
    if (epoch >= cfg.decay_epochs[i]) lr = cfg.lr0 / cfg.decay_divisors[i];
  }
  return lr;
}

FeaturePool load_pool(const std::string& manifest_path,
                      const FrontendConfig& frontend,
                      const std::string& cache_dir) {
  const auto entries = read_manifest(manifest_path);
  ULID_CHECK(!entries.empty()) << "manifest " << manifest_path << " is empty";
  std::set<std::string> names;
  for (const auto& e : entries) {
    if (e.label.empty()) {
      ULID_ERR << "training manifest " << manifest_path
               << " has an unlabeled utterance: " << e.id;
    }
    names.insert(e.label);
  }
  FeaturePool pool;
  pool.class_names.assign(names.begin(), names.end());
  std::map<std::string, int> index;
  for (size_t i = 0; i < pool.class_names.size(); ++i) {
    index[pool.class_names[i]] = static_cast<int>(i);
  }
  pool.feats.resize(entries.size());
  pool.labels.resize(entries.size());
  pool.ids.resize(entries.size());
  for (size_t i = 0; i < entries.size(); ++i) {
    pool.feats[i] = load_features(entries[i], frontend, cache_dir);
    pool.labels[i] = index[entries[i].label];
    pool.ids[i] = entries[i].id;
  }
  return pool;
}

std::vector<float> crop_or_extend(const FeatureSequence& f, int64_t target_len,
                                  Rng& rng) {
  std::vector<float> out(f.dim * target_len);
  int64_t start = 0;
  if (f.frames > target_len) {
    start = rng.uniform_int(0, f.frames - target_len);
  }
  for (int64_t d = 0; d < f.dim; ++d) {
    const float* src = f.data.data() + d * f.frames;
    float* dst = out.data() + d * target_len;
    if (f.frames >= target_len) {
      std::copy(src + start, src + start + target_len, dst);
    } else {
      for (int64_t t = 0; t < target_len; ++t) {
        dst[t] = src[t % f.frames];  // cyclic repetition
      }
    }
  }
  return out;
}

Batch make_batch(const FeaturePool& pool, const std::vector<int64_t>& indices,
                 const TrainConfig& cfg, Rng& rng) {
  ULID_CHECK(!indices.empty()) << "make_batch: empty selection";
  Batch batch;
  batch.crop_len = rng.uniform_int(cfg.crop_min, cfg.crop_max);
  const int64_t b = static_cast<int64_t>(indices.size());
  const int64_t dim = pool.feats[indices[0]].dim;
  batch.x = make_tensor<float>(Shape{b, 1, dim, batch.crop_len}, false);
  batch.labels.resize(indices.size());
  for (int64_t i = 0; i < b; ++i) {
    const auto& f = pool.feats[indices[i]];
    const auto crop = crop_or_extend(f, batch.crop_len, rng);
    std::copy(crop.begin(), crop.end(),
              batch.x->data() + i * dim * batch.crop_len);
    batch.labels[i] = pool.labels[indices[i]];
  }
  return batch;
}

namespace {

// SGD with momentum; decay-exempt entries skip the L2 term.
struct Sgd {
  struct Slot {
    TensorPtrF value;
    std::vector<float> velocity;
    bool decay;
  };
  std::vector<Slot> slots;
  double momentum, weight_decay;

  Sgd(TensorEntries<float>& entries, double momentum_, double weight_decay_)
      : momentum(momentum_), weight_decay(weight_decay_) {
    for (auto& e : entries) {
      if (!e.trainable) continue;
      e.value->requires_grad = true;
      slots.push_back({e.value, std::vector<float>(e.value->numel(), 0.0f),
                       e.decay});
    }
  }

  void zero_grads() {
    for (auto& s : slots) s.value->zero_grad();
  }

  void step(double lr) {
    for (auto& s : slots) {
      float* w = s.value->data();
      const float* g = s.value->grad();
      float* v = s.velocity.data();
      const float wd = s.decay ? static_cast<float>(weight_decay) : 0.0f;
      const float mom = static_cast<float>(momentum);
      const float lrf = static_cast<float>(lr);
      for (int64_t i = 0; i < s.value->numel(); ++i) {
        v[i] = mom * v[i] + g[i] + wd * w[i];
        w[i] -= lrf * v[i];
      }
    }
  }
};

}  // namespace

TrainResult train(Model<float>& model, const FeaturePool& pool,
                  const TrainConfig& cfg, const std::string& checkpoint_path,
                  const std::string& log_path, const std::string& config_hash) {
  cfg.validate(model.backbone.min_len());
  ULID_CHECK(!pool.feats.empty()) << "training pool is empty";
  ULID_CHECK(pool.class_names == model.spec.class_names)
      << "pool classes disagree with the model's class table";

  auto entries = model.tensors();
  Sgd sgd(entries, cfg.momentum, cfg.weight_decay);
  Rng rng(cfg.seed);

  TrainResult result;
  std::ostringstream log;
  bool have_checkpoint = false;

  const auto write_log = [&]() {
    if (!log_path.empty()) {
      const std::string text = log.str();
      atomic_write(log_path, [&](std::ostream& os) { os << text; });
    }
  };
  const auto write_checkpoint = [&](int64_t epoch) {
    if (!checkpoint_path.empty()) {
      save_checkpoint(model, checkpoint_path, {epoch, config_hash});
      have_checkpoint = true;
    }
  };

  std::vector<int64_t> order(pool.feats.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int64_t>(i);

  for (int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_schedule(cfg, epoch);
    // Fisher-Yates with the run's own stream keeps epochs reproducible.
    for (int64_t i = static_cast<int64_t>(order.size()) - 1; i > 0; --i) {
      std::swap(order[i], order[rng.uniform_int(0, i)]);
    }
    double loss_sum = 0;
    int64_t correct = 0, seen = 0;
    for (size_t pos = 0; pos < order.size(); pos += cfg.batch_size) {
      const size_t end = std::min(order.size(), pos + cfg.batch_size);
      std::vector<int64_t> idx(order.begin() + pos, order.begin() + end);
      Batch batch = make_batch(pool, idx, cfg, rng);

      TapeF tape;
      tape.set_release_memory(true);
      auto logits = model.forward_logits(&tape, batch.x, /*training=*/true);
      auto loss = softmax_cross_entropy(&tape, logits, batch.labels);
      const double loss_v = loss->at(0);
      if (!std::isfinite(loss_v)) {
        log << epoch << " " << lr << " nan nan\n";
        write_log();
        ULID_ERR << "training aborted: non-finite loss at epoch " << epoch
                 << " (last-good checkpoint "
                 << (have_checkpoint ? checkpoint_path : "was never written")
                 << " retained)";
      }
      // Batch accuracy now: backward releases the logits buffer.
      const int64_t bsz = static_cast<int64_t>(batch.labels.size());
      loss_sum += loss_v * static_cast<double>(bsz);
      for (int64_t i = 0; i < bsz; ++i) {
        const float* row = logits->data() + i * model.spec.n_classes();
        int best = 0;
        for (int64_t k = 1; k < model.spec.n_classes(); ++k) {
          if (row[k] > row[best]) best = static_cast<int>(k);
        }
        if (best == batch.labels[i]) ++correct;
      }
      seen += bsz;
      sgd.zero_grads();
      tape.backward_from(loss);
      sgd.step(lr);
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.lr = lr;
    stats.loss = loss_sum / static_cast<double>(seen);
    stats.acc = static_cast<double>(correct) / static_cast<double>(seen);
    result.history.push_back(stats);
    log << epoch << " " << lr << " " << stats.loss << " " << stats.acc << "\n";
    ULID_LOG << "epoch " << epoch << " lr " << lr << " loss " << stats.loss
             << " acc " << stats.acc;
    if ((epoch + 1) % cfg.checkpoint_every == 0) write_checkpoint(epoch);
  }
  write_checkpoint(cfg.epochs - 1);
  result.log_text = log.str();
  write_log();
  return result;
}

}  // namespace ulid
