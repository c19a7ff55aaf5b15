// include/ulid/wav.h

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

#ifndef ULID_WAV_H_
#define ULID_WAV_H_

#include <cstdint>
#include <string>
#include <vector>

namespace ulid {

struct WavData {
  int sample_rate = 0;
  std::vector<int16_t> samples;  // mono PCM
};

// RIFF/WAVE, PCM 16-bit mono only; anything else is rejected with a
// descriptive error.
WavData read_wav(const std::string& path);
void write_wav(const std::string& path, const WavData& wav);

}  // namespace ulid

#endif  // ULID_WAV_H_
