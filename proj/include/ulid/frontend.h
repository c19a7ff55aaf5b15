// include/ulid/frontend.h

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

#ifndef ULID_FRONTEND_H_
#define ULID_FRONTEND_H_

#include <cstdint>
#include <string>
#include <vector>

#include "ulid/wav.h"

namespace ulid {

constexpr int64_t kFbankDim = 64;
constexpr double kFrameLengthMs = 25.0;
constexpr double kFrameShiftMs = 10.0;

struct Utterance {
  std::string id;
  std::vector<int16_t> samples;
  int sample_rate = 0;     // 8000 or 16000
  std::string label;       // empty when unlabeled
};

// VAD-filtered, mean-normalized log mel-filterbank matrix, time-ordered.
// Stored row-major [dim][frames] in 32-bit floats; the compute pipeline runs
// in 64-bit and quantizes once at the end, so cached and on-the-fly features
// are identical.
struct FeatureSequence {
  int64_t dim = kFbankDim;
  int64_t frames = 0;
  std::vector<float> data;

  float at(int64_t d, int64_t t) const { return data[d * frames + t]; }
};

struct FrontendConfig {
  double vad_threshold_db = 30.0;  // keep frames within this of the peak
  int64_t cmn_window = 301;        // ~3 s at 10 ms shift
};

struct FbankGeom {
  int64_t win = 0, shift = 0, nfft = 0;
  int64_t num_frames(int64_t samples) const {
    return samples < win ? 0 : 1 + (samples - win) / shift;
  }
};

// 25 ms / 10 ms framing; DFT length is the next power of two >= window.
// Rejects sample rates other than 8 kHz and 16 kHz.
FbankGeom fbank_geom(int sample_rate);

// Mel filter center frequencies (Hz) of the 64 triangular filters spanning
// 20 Hz .. Nyquist.
std::vector<double> mel_center_freqs(int sample_rate);

// Pre-VAD, pre-normalization log mel-filterbank energies, [64][L] row-major.
// Per frame: DC removal, 0.97 pre-emphasis, Hamming window, magnitude
// spectrum, triangular mel integration, log with a 1e-10 energy floor.
std::vector<double> fbank(const Utterance& u, int64_t* frames_out);

// Frame keep-mask: a frame passes when its log mean-square energy is above
// both (max over the utterance - threshold) and the absolute ln(1e-8) floor.
// Framing matches fbank. Errors when every frame is rejected.
std::vector<uint8_t> energy_vad(const Utterance& u, double threshold_db);

// Subtracts from every frame the mean of a window of min(window, L)
// consecutive frames positioned around it (shifted, never padded, at the
// edges). Summation per frame is a fresh ascending pass, which is what the
// naive reference recomputes.
void sliding_cmn(double* feats, int64_t dim, int64_t frames, int64_t window);

// fbank -> VAD mask applied -> sliding CMN -> 32-bit quantization.
FeatureSequence compute_features(const Utterance& u, const FrontendConfig& cfg);

// Feature cache file: magic "ULFB", u32 version, u32 dim, u32 frames, then
// little-endian 32-bit floats row-major dim x frames.
void write_feature_file(const std::string& path, const FeatureSequence& f);
FeatureSequence read_feature_file(const std::string& path);

struct ManifestEntry {
  std::string id;
  std::string path;    // resolved against the manifest's directory
  std::string label;   // empty when '-'
  std::string bucket;  // optional duration bucket tag
};

// One line per utterance: <id> <path> <label|-> [<bucket>]
std::vector<ManifestEntry> read_manifest(const std::string& path);

// Loads cached features when cache_dir has <id>.ulfb, else computes from the
// WAV (and never writes as a side effect).
FeatureSequence load_features(const ManifestEntry& entry,
                              const FrontendConfig& cfg,
                              const std::string& cache_dir);

}  // namespace ulid

#endif  // ULID_FRONTEND_H_
