// src/synth.cc

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

#include "ulid/synth.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ulid/common.h"
#include "ulid/io_util.h"
#include "ulid/parallel.h"
#include "ulid/rng.h"
#include "ulid/wav.h"

namespace ulid {

namespace {

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Two-pole resonator: y[n] = x[n] + 2 r cos(w0) y[n-1] - r^2 y[n-2].
struct Resonator {
  double a1, a2;
  double y1 = 0, y2 = 0;
  Resonator(double freq, double bw, int sr) {
    const double r = std::exp(-M_PI * bw / sr);
    a1 = 2.0 * r * std::cos(2.0 * M_PI * freq / sr);
    a2 = -r * r;
  }
  double step(double x) {
    const double y = x + a1 * y1 + a2 * y2;
    y2 = y1;
    y1 = y;
    return y;
  }
};

}  // namespace

std::vector<SynthLanguageSpec> default_languages(int n_langs, int sample_rate) {
  ULID_CHECK(n_langs >= 2) << "need at least 2 languages";
  const double nyquist = sample_rate / 2.0;
  std::vector<SynthLanguageSpec> langs(n_langs);
  for (int i = 0; i < n_langs; ++i) {
    auto& l = langs[i];
    std::ostringstream id;
    id << "lang" << static_cast<char>('A' + i % 26);
    if (i >= 26) id << i / 26;
    l.id = id.str();
    // 200+ Hz pairwise separation in every slot by construction.
    l.freq[0] = 350.0 + 200.0 * i;
    l.freq[1] = 1150.0 + 230.0 * i;
    l.freq[2] = 2100.0 + 260.0 * i;
    l.bw[0] = 90.0 + 8.0 * i;
    l.bw[1] = 120.0 + 10.0 * i;
    l.bw[2] = 160.0 + 12.0 * i;
    l.syllable_rate = 3.0 + 0.4 * (i % 5);
    l.noise_floor_db = -55.0;
    if (l.freq[2] + 2.0 * l.bw[2] >= nyquist) {
      ULID_ERR << "language " << i << " resonance " << l.freq[2]
               << " Hz too close to Nyquist " << nyquist
               << " Hz; use fewer languages or a higher sample rate";
    }
  }
  return langs;
}

std::vector<int16_t> synth_utterance(const SynthLanguageSpec& lang,
                                     double duration_s, int sample_rate,
                                     uint64_t utt_seed) {
  Rng rng(utt_seed);
  const int64_t n = static_cast<int64_t>(duration_s * sample_rate);
  ULID_CHECK(n > 0) << "empty utterance requested";

  // Leading/trailing silence so the VAD has work to do.
  const double edge_s = std::clamp(0.10 * duration_s, 0.08, 0.6);
  const int64_t lead = static_cast<int64_t>(edge_s * sample_rate *
                                            rng.uniform(0.8, 1.2));
  const int64_t trail = static_cast<int64_t>(edge_s * sample_rate *
                                             rng.uniform(0.8, 1.2));

  // Syllable-rate burst envelope with 20 ms raised-cosine edges.
  std::vector<double> env(n, 0.0);
  const int64_t ramp = sample_rate / 50;
  int64_t pos = lead;
  const int64_t speech_end = std::max(lead, n - trail);
  while (pos < speech_end) {
    const double burst_s = rng.uniform(0.40, 0.75) / lang.syllable_rate;
    const double gap_s = rng.uniform(0.15, 0.40) / lang.syllable_rate;
    int64_t burst = static_cast<int64_t>(burst_s * sample_rate);
    burst = std::min(burst, speech_end - pos);
    for (int64_t i = 0; i < burst; ++i) {
      double g = 1.0;
      if (i < ramp) g = 0.5 * (1.0 - std::cos(M_PI * i / ramp));
      if (burst - 1 - i < ramp) {
        g = std::min(g, 0.5 * (1.0 - std::cos(M_PI * (burst - 1 - i) / ramp)));
      }
      env[pos + i] = g;
    }
    pos += burst + static_cast<int64_t>(gap_s * sample_rate);
  }

  Resonator r0(lang.freq[0], lang.bw[0], sample_rate);
  Resonator r1(lang.freq[1], lang.bw[1], sample_rate);
  Resonator r2(lang.freq[2], lang.bw[2], sample_rate);
  std::vector<double> audio(n);
  double peak = 0;
  for (int64_t i = 0; i < n; ++i) {
    const double x = rng.normal();
    const double v = r0.step(x) + 0.7 * r1.step(x) + 0.5 * r2.step(x);
    audio[i] = v * env[i];
    peak = std::max(peak, std::abs(audio[i]));
  }
  if (peak <= 0) peak = 1.0;

  // Per-utterance level within a few dB of -12 dBFS, plus the noise floor.
  const double level = 0.25 * std::pow(10.0, rng.uniform(-5.0, 0.0) / 20.0);
  const double gain = level / peak;
  const double floor_amp = level * std::pow(10.0, lang.noise_floor_db / 20.0);
  std::vector<int16_t> pcm(n);
  for (int64_t i = 0; i < n; ++i) {
    double v = audio[i] * gain + floor_amp * rng.normal();
    v = std::clamp(v, -0.999, 0.999);
    pcm[i] = static_cast<int16_t>(std::lround(v * 32767.0));
  }
  return pcm;
}

void generate_corpus(const SynthConfig& cfg, const std::string& out_dir) {
  ULID_CHECK(cfg.n_langs >= 2) << "need at least 2 languages";
  ULID_CHECK(cfg.train_per_lang >= 1 && cfg.test_per_lang >= 0)
      << "bad corpus sizes";
  const auto langs = default_languages(cfg.n_langs, cfg.sample_rate);
  make_dirs(out_dir + "/wav");

  struct Job {
    std::string id;
    int lang;
    double duration;
    std::string bucket;  // empty for train
    uint64_t seed;
  };
  std::vector<Job> jobs;
  Rng seeder(cfg.seed);
  for (int l = 0; l < cfg.n_langs; ++l) {
    for (int i = 0; i < cfg.train_per_lang; ++i) {
      Job j;
      std::ostringstream id;
      id << langs[l].id << "_train_" << i;
      j.id = id.str();
      j.lang = l;
      j.duration = cfg.train_dur_min +
                   (cfg.train_dur_max - cfg.train_dur_min) * seeder.uniform();
      j.seed = splitmix64(cfg.seed ^ seeder.raw());
      jobs.push_back(j);
    }
  }
  const size_t n_train = jobs.size();
  for (int l = 0; l < cfg.n_langs; ++l) {
    for (double dur : cfg.test_durations) {
      std::ostringstream bucket;
      bucket << dur << "s";
      for (int i = 0; i < cfg.test_per_lang; ++i) {
        Job j;
        std::ostringstream id;
        id << langs[l].id << "_test_" << bucket.str() << "_" << i;
        j.id = id.str();
        j.lang = l;
        j.duration = dur * seeder.uniform(0.92, 1.08);
        j.bucket = bucket.str();
        j.seed = splitmix64(cfg.seed ^ seeder.raw());
        jobs.push_back(j);
      }
    }
  }

  parallel_for(static_cast<int64_t>(jobs.size()), [&](int64_t i) {
    const Job& j = jobs[i];
    WavData wav;
    wav.sample_rate = cfg.sample_rate;
    wav.samples =
        synth_utterance(langs[j.lang], j.duration, cfg.sample_rate, j.seed);
    write_wav(out_dir + "/wav/" + j.id + ".wav", wav);
  });

  atomic_write(out_dir + "/train.scp", [&](std::ostream& os) {
    for (size_t i = 0; i < n_train; ++i) {
      os << jobs[i].id << " wav/" << jobs[i].id << ".wav "
         << langs[jobs[i].lang].id << "\n";
    }
  });
  atomic_write(out_dir + "/test.scp", [&](std::ostream& os) {
    for (size_t i = n_train; i < jobs.size(); ++i) {
      os << jobs[i].id << " wav/" << jobs[i].id << ".wav "
         << langs[jobs[i].lang].id << " " << jobs[i].bucket << "\n";
    }
  });
}

}  // namespace ulid
