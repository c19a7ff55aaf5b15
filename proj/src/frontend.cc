// src/frontend.cc

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

#include "ulid/frontend.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ulid/common.h"
#include "ulid/io_util.h"

namespace ulid {

namespace {

constexpr double kPreEmphasis = 0.97;
constexpr double kEnergyFloor = 1e-10;
constexpr double kVadAbsFloor = 1e-8;

// In-place iterative radix-2 FFT; n must be a power of two.
void fft_radix2(std::vector<std::complex<double>>& a) {
  const size_t n = a.size();
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * M_PI / static_cast<double>(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0);
      for (size_t j = 0; j < len / 2; ++j) {
        const std::complex<double> u = a[i + j];
        const std::complex<double> v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

// 66 mel-spaced edge frequencies from 20 Hz to Nyquist; filter j spans
// edges [j, j+2] with its peak at edge j+1.
std::vector<double> mel_points(int sample_rate) {
  const double lo = hz_to_mel(20.0);
  const double hi = hz_to_mel(sample_rate / 2.0);
  std::vector<double> pts(kFbankDim + 2);
  for (int64_t i = 0; i < kFbankDim + 2; ++i) {
    pts[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) /
                                static_cast<double>(kFbankDim + 1));
  }
  return pts;
}

void check_utterance(const Utterance& u) {
  ULID_CHECK(!u.samples.empty()) << "utterance " << u.id << " is empty";
  if (u.sample_rate != 8000 && u.sample_rate != 16000) {
    ULID_ERR << "utterance " << u.id << ": unsupported sample rate "
             << u.sample_rate << " (need 8000 or 16000)";
  }
}

uint32_t rd_u32(std::istream& is, const std::string& what) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) ULID_ERR << "truncated " << what;
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) |
         (static_cast<uint32_t>(b[3]) << 24);
}

void wr_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF),
                        static_cast<unsigned char>((v >> 8) & 0xFF),
                        static_cast<unsigned char>((v >> 16) & 0xFF),
                        static_cast<unsigned char>((v >> 24) & 0xFF)};
  os.write(reinterpret_cast<char*>(b), 4);
}

}  // namespace

FbankGeom fbank_geom(int sample_rate) {
  if (sample_rate != 8000 && sample_rate != 16000) {
    ULID_ERR << "unsupported sample rate " << sample_rate
             << " (need 8000 or 16000)";
  }
  FbankGeom g;
  g.win = static_cast<int64_t>(sample_rate * kFrameLengthMs / 1000.0);
  g.shift = static_cast<int64_t>(sample_rate * kFrameShiftMs / 1000.0);
  g.nfft = 1;
  while (g.nfft < g.win) g.nfft <<= 1;
  return g;
}

std::vector<double> mel_center_freqs(int sample_rate) {
  auto pts = mel_points(sample_rate);
  return std::vector<double>(pts.begin() + 1, pts.end() - 1);
}

std::vector<double> fbank(const Utterance& u, int64_t* frames_out) {
  check_utterance(u);
  const FbankGeom g = fbank_geom(u.sample_rate);
  const int64_t frames = g.num_frames(static_cast<int64_t>(u.samples.size()));
  if (frames < 1) {
    ULID_ERR << "utterance " << u.id << " too short for one 25 ms frame ("
             << u.samples.size() << " samples at " << u.sample_rate << " Hz)";
  }

  // Triangular filter weights over the magnitude-spectrum bins.
  const auto pts = mel_points(u.sample_rate);
  const int64_t bins = g.nfft / 2 + 1;
  const double bin_hz = static_cast<double>(u.sample_rate) / g.nfft;
  std::vector<double> weights(kFbankDim * bins, 0.0);
  for (int64_t j = 0; j < kFbankDim; ++j) {
    const double lo = pts[j], c = pts[j + 1], hi = pts[j + 2];
    for (int64_t k = 0; k < bins; ++k) {
      const double f = k * bin_hz;
      if (f > lo && f < c) {
        weights[j * bins + k] = (f - lo) / (c - lo);
      } else if (f >= c && f < hi) {
        weights[j * bins + k] = (hi - f) / (hi - c);
      }
    }
  }

  std::vector<double> window(g.win);
  for (int64_t i = 0; i < g.win; ++i) {
    window[i] = 0.54 - 0.46 * std::cos(2.0 * M_PI * i / (g.win - 1));
  }

  std::vector<double> out(kFbankDim * frames);
  std::vector<double> frame(g.win);
  std::vector<std::complex<double>> spec(g.nfft);
  std::vector<double> mag(bins);
  for (int64_t t = 0; t < frames; ++t) {
    const int16_t* src = u.samples.data() + t * g.shift;
    double mean = 0;
    for (int64_t i = 0; i < g.win; ++i) {
      frame[i] = static_cast<double>(src[i]) / 32768.0;
      mean += frame[i];
    }
    mean /= static_cast<double>(g.win);
    for (int64_t i = 0; i < g.win; ++i) frame[i] -= mean;
    for (int64_t i = g.win - 1; i > 0; --i) {
      frame[i] -= kPreEmphasis * frame[i - 1];
    }
    frame[0] *= 1.0 - kPreEmphasis;
    for (int64_t i = 0; i < g.win; ++i) {
      spec[i] = frame[i] * window[i];
    }
    std::fill(spec.begin() + g.win, spec.end(), std::complex<double>(0.0));
    fft_radix2(spec);
    for (int64_t k = 0; k < bins; ++k) mag[k] = std::abs(spec[k]);
    for (int64_t j = 0; j < kFbankDim; ++j) {
      const double* wrow = weights.data() + j * bins;
      double e = 0;
      for (int64_t k = 0; k < bins; ++k) e += wrow[k] * mag[k];
      out[j * frames + t] = std::log(std::max(e, kEnergyFloor));
    }
  }
  *frames_out = frames;
  return out;
}

std::vector<uint8_t> energy_vad(const Utterance& u, double threshold_db) {
  check_utterance(u);
  const FbankGeom g = fbank_geom(u.sample_rate);
  const int64_t frames = g.num_frames(static_cast<int64_t>(u.samples.size()));
  if (frames < 1) {
    ULID_ERR << "utterance " << u.id << " too short for one 25 ms frame";
  }
  std::vector<double> log_e(frames);
  double max_e = -1e300;
  for (int64_t t = 0; t < frames; ++t) {
    const int16_t* src = u.samples.data() + t * g.shift;
    double e = 0;
    for (int64_t i = 0; i < g.win; ++i) {
      const double s = static_cast<double>(src[i]) / 32768.0;
      e += s * s;
    }
    e /= static_cast<double>(g.win);
    log_e[t] = std::log(std::max(e, 1e-12));
    max_e = std::max(max_e, log_e[t]);
  }
  // threshold_db below the utterance peak, plus an absolute floor
  const double rel = max_e - threshold_db / 10.0 * std::log(10.0);
  const double abs_floor = std::log(kVadAbsFloor);
  std::vector<uint8_t> keep(frames);
  int64_t kept = 0;
  for (int64_t t = 0; t < frames; ++t) {
    keep[t] = log_e[t] > rel && log_e[t] > abs_floor ? 1 : 0;
    kept += keep[t];
  }
  if (kept == 0) ULID_ERR << "no speech detected in utterance " << u.id;
  return keep;
}

void sliding_cmn(double* feats, int64_t dim, int64_t frames, int64_t window) {
  const int64_t w = std::min(window, frames);
  const int64_t half = (window - 1) / 2;
  std::vector<double> means(frames);
  for (int64_t d = 0; d < dim; ++d) {
    double* row = feats + d * frames;
    for (int64_t t = 0; t < frames; ++t) {
      int64_t lo = t - half;
      lo = std::max<int64_t>(0, std::min(lo, frames - w));
      double s = 0;
      for (int64_t i = lo; i < lo + w; ++i) s += row[i];
      means[t] = s / static_cast<double>(w);
    }
    for (int64_t t = 0; t < frames; ++t) row[t] -= means[t];
  }
}

FeatureSequence compute_features(const Utterance& u,
                                 const FrontendConfig& cfg) {
  int64_t frames = 0;
  auto feats = fbank(u, &frames);
  const auto keep = energy_vad(u, cfg.vad_threshold_db);
  int64_t kept = 0;
  for (uint8_t k : keep) kept += k;

  std::vector<double> masked(kFbankDim * kept);
  for (int64_t d = 0; d < kFbankDim; ++d) {
    int64_t o = 0;
    for (int64_t t = 0; t < frames; ++t) {
      if (keep[t]) masked[d * kept + o++] = feats[d * frames + t];
    }
  }
  sliding_cmn(masked.data(), kFbankDim, kept, cfg.cmn_window);

  FeatureSequence out;
  out.dim = kFbankDim;
  out.frames = kept;
  out.data.resize(masked.size());
  for (size_t i = 0; i < masked.size(); ++i) {
    out.data[i] = static_cast<float>(masked[i]);
  }
  return out;
}

void write_feature_file(const std::string& path, const FeatureSequence& f) {
  atomic_write(path, [&](std::ostream& os) {
    os.write("ULFB", 4);
    wr_u32(os, 1);
    wr_u32(os, static_cast<uint32_t>(f.dim));
    wr_u32(os, static_cast<uint32_t>(f.frames));
    for (float v : f.data) {
      const uint32_t u = std::bit_cast<uint32_t>(v);
      wr_u32(os, u);
    }
  });
}

FeatureSequence read_feature_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) ULID_ERR << "cannot open feature file " << path;
  char magic[4];
  is.read(magic, 4);
  if (!is || std::string(magic, 4) != "ULFB") {
    ULID_ERR << path << " is not a ULFB feature file";
  }
  const uint32_t version = rd_u32(is, path);
  if (version != 1) {
    ULID_ERR << path << ": unsupported feature file version " << version;
  }
  FeatureSequence f;
  f.dim = rd_u32(is, path);
  f.frames = rd_u32(is, path);
  ULID_CHECK(f.dim > 0 && f.frames > 0) << path << ": empty feature matrix";
  f.data.resize(f.dim * f.frames);
  for (auto& v : f.data) {
    v = std::bit_cast<float>(rd_u32(is, path + " (payload)"));
  }
  return f;
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) ULID_ERR << "cannot open manifest " << path;
  const std::string dir =
      std::filesystem::path(path).parent_path().string();
  std::vector<ManifestEntry> entries;
  std::string line;
  int64_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    ManifestEntry e;
    std::string label;
    if (!(ls >> e.id >> e.path >> label)) {
      ULID_ERR << path << ":" << line_no
               << ": expected '<id> <path> <label|-> [<bucket>]'";
    }
    ls >> e.bucket;  // optional
    std::string extra;
    if (ls >> extra) {
      ULID_ERR << path << ":" << line_no << ": unexpected trailing field '"
               << extra << "'";
    }
    if (label != "-") e.label = label;
    if (!e.path.empty() && e.path[0] != '/' && !dir.empty()) {
      e.path = dir + "/" + e.path;
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

FeatureSequence load_features(const ManifestEntry& entry,
                              const FrontendConfig& cfg,
                              const std::string& cache_dir) {
  if (!cache_dir.empty()) {
    const std::string cached = cache_dir + "/" + entry.id + ".ulfb";
    if (file_exists(cached)) return read_feature_file(cached);
  }
  const WavData wav = read_wav(entry.path);
  Utterance u{entry.id, wav.samples, wav.sample_rate, entry.label};
  return compute_features(u, cfg);
}

}  // namespace ulid
