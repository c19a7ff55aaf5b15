// tools/ulid_main.cc

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

#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "ulid/config.h"
#include "ulid/gradcheck.h"
#include "ulid/io_util.h"
#include "ulid/model.h"
#include "ulid/parallel.h"
#include "ulid/scoring.h"
#include "ulid/synth.h"

namespace {

using namespace ulid;

// Flags override the config file; ULID_SEED is the fallback when neither
// names a seed.
struct GlobalArgs {
  std::string config_path;
  std::optional<int64_t> seed;
  std::optional<int> workers;
};

RunConfig resolve_config(const GlobalArgs& g) {
  RunConfig cfg;
  bool seed_from_file = false;
  if (!g.config_path.empty()) {
    cfg = RunConfig::load(g.config_path);
    // Re-scan for an explicit seed line to know whether the file set it.
    std::ifstream is(g.config_path);
    std::string line;
    while (std::getline(is, line)) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      std::string key = line.substr(0, eq);
      key.erase(key.find_last_not_of(" \t") + 1);
      key.erase(0, key.find_first_not_of(" \t"));
      if (key == "seed") seed_from_file = true;
    }
  }
  if (!g.seed.has_value() && !seed_from_file) {
    if (const char* env = std::getenv("ULID_SEED")) {
      cfg.set("seed", env);
    }
  }
  if (g.seed.has_value()) cfg.set("seed", std::to_string(*g.seed));
  if (g.workers.has_value()) cfg.workers = *g.workers;
  set_num_workers(cfg.workers);
  return cfg;
}

int cmd_synth(const RunConfig& cfg) {
  ULID_CHECK(!cfg.out_dir.empty()) << "synth needs --out";
  generate_corpus(cfg.synth, cfg.out_dir);
  ULID_LOG << "corpus written to " << cfg.out_dir << " (train.scp, test.scp)";
  return 0;
}

int cmd_features(const RunConfig& cfg) {
  ULID_CHECK(!cfg.train_manifest.empty()) << "features needs --manifest";
  ULID_CHECK(!cfg.out_dir.empty()) << "features needs --out";
  const auto entries = read_manifest(cfg.train_manifest);
  ULID_CHECK(!entries.empty()) << "manifest " << cfg.train_manifest
                               << " is empty";
  make_dirs(cfg.out_dir);
  std::vector<std::string> errors(entries.size());
  parallel_for(static_cast<int64_t>(entries.size()), [&](int64_t i) {
    try {
      const WavData wav = read_wav(entries[i].path);
      Utterance u{entries[i].id, wav.samples, wav.sample_rate,
                  entries[i].label};
      write_feature_file(cfg.out_dir + "/" + entries[i].id + ".ulfb",
                         compute_features(u, cfg.frontend));
    } catch (const Error& e) {
      errors[i] = e.what();
    }
  });
  int64_t failed = 0;
  for (size_t i = 0; i < entries.size(); ++i) {
    if (!errors[i].empty()) {
      ++failed;
      ULID_WARN << entries[i].id << ": " << errors[i];
    }
  }
  if (failed > 0) {
    ULID_ERR << failed << " of " << entries.size()
             << " utterances failed feature extraction";
  }
  ULID_LOG << "wrote " << entries.size() << " feature files to "
           << cfg.out_dir;
  return 0;
}

int cmd_train(const RunConfig& cfg) {
  ULID_CHECK(!cfg.train_manifest.empty()) << "train needs --train-manifest";
  ULID_CHECK(!cfg.checkpoint_path.empty()) << "train needs --out";
  FeaturePool pool =
      load_pool(cfg.train_manifest, cfg.frontend, cfg.features_dir);
  ULID_LOG << "loaded " << pool.feats.size() << " utterances, "
           << pool.class_names.size() << " classes";

  ModelSpec spec;
  spec.conv = cfg.conv();
  spec.encoder = cfg.encoder();
  spec.class_names = pool.class_names;
  spec.seed = cfg.seed;
  Model<float> model;
  model.init(spec);

  train(model, pool, cfg.train, cfg.checkpoint_path, cfg.log_path, cfg.hash());
  ULID_LOG << "checkpoint written to " << cfg.checkpoint_path;
  return 0;
}

int cmd_eval(const RunConfig& cfg) {
  ULID_CHECK(!cfg.checkpoint_path.empty()) << "eval needs --checkpoint";
  ULID_CHECK(!cfg.test_manifest.empty()) << "eval needs --manifest";
  Model<float> model = load_checkpoint(cfg.checkpoint_path);
  const auto entries = read_manifest(cfg.test_manifest);
  const auto run = score_run(model, entries, cfg.frontend, cfg.features_dir);
  if (!cfg.scores_path.empty()) {
    write_score_file(cfg.scores_path, run.scores);
    ULID_LOG << "scores written to " << cfg.scores_path;
  }
  const auto rows = bucket_reports(run.scores);
  const std::string name =
      "CNN-" + [&] {
        std::string k = encoder_kind_name(model.spec.encoder.kind);
        for (auto& ch : k) ch = static_cast<char>(std::toupper(ch));
        return k;
      }();
  std::cout << format_report(name, rows);
  if (run.n_failed > 0) {
    std::cout << "# skipped " << run.n_failed << " utterances\n";
  }
  return 0;
}

int cmd_infer(const RunConfig& cfg) {
  ULID_CHECK(!cfg.checkpoint_path.empty()) << "infer needs --checkpoint";
  ULID_CHECK(!cfg.test_manifest.empty()) << "infer needs --manifest";
  ULID_CHECK(!cfg.out_dir.empty()) << "infer needs --out";
  Model<float> model = load_checkpoint(cfg.checkpoint_path);
  const auto entries = read_manifest(cfg.test_manifest);
  ULID_CHECK(!entries.empty()) << "manifest is empty";
  std::vector<std::vector<double>> scores(entries.size());
  std::vector<std::string> errors(entries.size());
  parallel_for(static_cast<int64_t>(entries.size()), [&](int64_t i) {
    try {
      scores[i] =
          model.classify(load_features(entries[i], cfg.frontend,
                                       cfg.features_dir));
    } catch (const Error& e) {
      errors[i] = e.what();
    }
  });
  int64_t failed = 0;
  atomic_write(cfg.out_dir, [&](std::ostream& os) {
    os << std::setprecision(17);
    for (size_t i = 0; i < entries.size(); ++i) {
      if (!errors[i].empty()) continue;
      os << entries[i].id << " ";
      for (size_t k = 0; k < scores[i].size(); ++k) {
        if (k) os << ",";
        os << scores[i][k];
      }
      os << "\n";
    }
  });
  for (size_t i = 0; i < entries.size(); ++i) {
    if (!errors[i].empty()) {
      ++failed;
      ULID_WARN << "skipping " << entries[i].id << ": " << errors[i];
    }
  }
  ULID_LOG << "posteriors for " << (entries.size() - failed)
           << " utterances written to " << cfg.out_dir
           << (failed ? " (" + std::to_string(failed) + " skipped)" : "");
  return 0;
}

int cmd_rf(const RunConfig& cfg, bool fig3, const std::string& spec_text,
           int64_t len, int64_t freq) {
  ConvStackSpec spec;
  if (fig3) {
    spec = ConvStackSpec::toy_example();
  } else if (!spec_text.empty()) {
    spec = ConvStackSpec::parse(spec_text);
  } else {
    spec = cfg.conv();
  }
  const auto rows = receptive_field(spec, freq, len);
  std::cout << std::left << std::setw(10) << "layer" << std::setw(8) << "K"
            << std::setw(8) << "S" << std::setw(6) << "RF" << std::setw(7)
            << "jump" << "shape\n";
  std::cout << std::setw(10) << "input" << std::setw(8) << "-" << std::setw(8)
            << "-" << std::setw(6) << 1 << std::setw(7) << 1 << "(" << freq
            << ", " << len << ")\n";
  for (const auto& r : rows) {
    std::ostringstream k, s, shape;
    k << r.k << "x" << r.k;
    s << r.s;
    shape << "(" << r.out_h << ", " << r.out_w << ")";
    std::cout << std::setw(10) << r.name << std::setw(8) << k.str()
              << std::setw(8) << s.str() << std::setw(6) << r.rf_w
              << std::setw(7) << r.jump_w << shape.str() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"utterance-level language identification (ulid)"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  GlobalArgs g;
  app.add_option("--config", g.config_path, "run-config file");
  int64_t seed_flag = 0;
  auto* seed_opt = app.add_option("--seed", seed_flag, "random seed");
  int workers_flag = 0;
  auto* workers_opt =
      app.add_option("--workers", workers_flag, "parallel worker cap");

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  std::string out_dir;
  int langs = -1, train_per = -1, test_per = -1, sample_rate = -1;
  std::string durations;
  synth->add_option("--out", out_dir, "output directory")->required();
  synth->add_option("--langs", langs, "number of languages");
  synth->add_option("--train-per-lang", train_per, "train utterances/language");
  synth->add_option("--test-per-lang", test_per, "test utterances/bucket");
  synth->add_option("--durations", durations, "test buckets, e.g. 1,3,10");
  synth->add_option("--sample-rate", sample_rate, "8000 or 16000");

  // features
  auto* features = app.add_subcommand("features", "cache fbank features");
  std::string manifest;
  features->add_option("--manifest", manifest, "input manifest")->required();
  features->add_option("--out", out_dir, "feature directory")->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "train a model");
  std::string encoder, train_manifest, features_dir, checkpoint, log_path;
  int64_t epochs = -1, batch = -1, crop_min = -1, crop_max = -1;
  double lr0 = -1;
  train_cmd->add_option("--encoder", encoder, "tap|gru|lstm|lde");
  train_cmd->add_option("--train-manifest", train_manifest, "train manifest");
  train_cmd->add_option("--features", features_dir, "feature cache dir");
  train_cmd->add_option("--out", checkpoint, "checkpoint path");
  train_cmd->add_option("--log", log_path, "training log path");
  train_cmd->add_option("--epochs", epochs, "epoch count");
  train_cmd->add_option("--batch-size", batch, "batch size");
  train_cmd->add_option("--crop-min", crop_min, "min crop frames");
  train_cmd->add_option("--crop-max", crop_max, "max crop frames");
  train_cmd->add_option("--lr0", lr0, "initial learning rate");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "score a test manifest");
  std::string scores_path;
  eval_cmd->add_option("--checkpoint", checkpoint, "model checkpoint");
  eval_cmd->add_option("--manifest", manifest, "test manifest");
  eval_cmd->add_option("--features", features_dir, "feature cache dir");
  eval_cmd->add_option("--scores", scores_path, "score file to write");

  // infer
  auto* infer_cmd = app.add_subcommand("infer", "emit log-posteriors");
  infer_cmd->add_option("--checkpoint", checkpoint, "model checkpoint");
  infer_cmd->add_option("--manifest", manifest, "utterance manifest");
  infer_cmd->add_option("--features", features_dir, "feature cache dir");
  infer_cmd->add_option("--out", out_dir, "posterior file to write");

  // rf
  auto* rf_cmd = app.add_subcommand("rf", "receptive-field table");
  bool fig3 = false;
  std::string rf_spec;
  int64_t rf_len = 300, rf_freq = 64;
  rf_cmd->add_flag("--fig3", fig3, "use the five-layer toy stack");
  rf_cmd->add_option("--spec", rf_spec, "conv stack spec string");
  rf_cmd->add_option("-L,--frames", rf_len, "input length in frames");
  rf_cmd->add_option("--freq", rf_freq, "input frequency bins");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << std::endl;
    return 2;
  }

  try {
    if (seed_opt->count()) g.seed = seed_flag;
    if (workers_opt->count()) g.workers = workers_flag;
    RunConfig cfg = resolve_config(g);

    if (synth->parsed()) {
      cfg.out_dir = out_dir;
      if (langs > 0) cfg.synth.n_langs = langs;
      if (train_per >= 0) cfg.synth.train_per_lang = train_per;
      if (test_per >= 0) cfg.synth.test_per_lang = test_per;
      if (sample_rate > 0) cfg.synth.sample_rate = sample_rate;
      if (!durations.empty()) cfg.set("synth.durations", durations);
      cfg.synth.seed = cfg.seed;
      return cmd_synth(cfg);
    }
    if (features->parsed()) {
      cfg.train_manifest = manifest;
      cfg.out_dir = out_dir;
      return cmd_features(cfg);
    }
    if (train_cmd->parsed()) {
      if (!encoder.empty()) cfg.set("encoder.kind", encoder);
      if (!train_manifest.empty()) cfg.train_manifest = train_manifest;
      if (!features_dir.empty()) cfg.features_dir = features_dir;
      if (!checkpoint.empty()) cfg.checkpoint_path = checkpoint;
      if (!log_path.empty()) cfg.log_path = log_path;
      if (epochs > 0) {
        cfg.train.epochs = epochs;
        // Decay points past the shortened run never fire; drop them so the
        // config stays valid.
        std::vector<int64_t> de;
        std::vector<double> dd;
        for (size_t i = 0; i < cfg.train.decay_epochs.size(); ++i) {
          if (cfg.train.decay_epochs[i] < epochs) {
            de.push_back(cfg.train.decay_epochs[i]);
            dd.push_back(cfg.train.decay_divisors[i]);
          } else {
            ULID_WARN << "dropping decay epoch " << cfg.train.decay_epochs[i]
                      << " (>= epochs " << epochs << ")";
          }
        }
        cfg.train.decay_epochs = de;
        cfg.train.decay_divisors = dd;
      }
      if (batch > 0) cfg.train.batch_size = batch;
      if (crop_min > 0) cfg.train.crop_min = crop_min;
      if (crop_max > 0) cfg.train.crop_max = crop_max;
      if (lr0 > 0) cfg.train.lr0 = lr0;
      return cmd_train(cfg);
    }
    if (eval_cmd->parsed()) {
      if (!checkpoint.empty()) cfg.checkpoint_path = checkpoint;
      if (!manifest.empty()) cfg.test_manifest = manifest;
      if (!features_dir.empty()) cfg.features_dir = features_dir;
      if (!scores_path.empty()) cfg.scores_path = scores_path;
      return cmd_eval(cfg);
    }
    if (infer_cmd->parsed()) {
      if (!checkpoint.empty()) cfg.checkpoint_path = checkpoint;
      if (!manifest.empty()) cfg.test_manifest = manifest;
      if (!features_dir.empty()) cfg.features_dir = features_dir;
      if (!out_dir.empty()) cfg.out_dir = out_dir;
      return cmd_infer(cfg);
    }
    if (rf_cmd->parsed()) {
      return cmd_rf(cfg, fig3, rf_spec, rf_len, rf_freq);
    }
    std::cerr << "usage error: no subcommand" << std::endl;
    return 2;
  } catch (const ulid::Error& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << std::endl;
    return 1;
  }
}
