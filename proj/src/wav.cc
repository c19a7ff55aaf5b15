// src/wav.cc

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

#include "ulid/wav.h"

#include <cstring>
#include <fstream>

#include "ulid/common.h"
#include "ulid/io_util.h"

namespace ulid {

namespace {

uint32_t rd_u32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) |
         (static_cast<uint32_t>(p[3]) << 24);
}

uint16_t rd_u16(const unsigned char* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

void wr_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF),
                        static_cast<unsigned char>((v >> 8) & 0xFF),
                        static_cast<unsigned char>((v >> 16) & 0xFF),
                        static_cast<unsigned char>((v >> 24) & 0xFF)};
  os.write(reinterpret_cast<char*>(b), 4);
}

void wr_u16(std::ostream& os, uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v & 0xFF),
                        static_cast<unsigned char>((v >> 8) & 0xFF)};
  os.write(reinterpret_cast<char*>(b), 2);
}

}  // namespace

WavData read_wav(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) ULID_ERR << "cannot open WAV file " << path;
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    ULID_ERR << path << " is not a RIFF/WAVE file";
  }

  WavData out;
  bool have_fmt = false, have_data = false;
  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const char* id = reinterpret_cast<const char*>(bytes.data() + pos);
    const uint32_t size = rd_u32(bytes.data() + pos + 4);
    const size_t body = pos + 8;
    if (body + size > bytes.size()) {
      ULID_ERR << path << ": chunk '" << std::string(id, 4)
               << "' overruns the file";
    }
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (size < 16) ULID_ERR << path << ": fmt chunk too small";
      const uint16_t format = rd_u16(bytes.data() + body);
      const uint16_t channels = rd_u16(bytes.data() + body + 2);
      const uint32_t rate = rd_u32(bytes.data() + body + 4);
      const uint16_t bits = rd_u16(bytes.data() + body + 14);
      if (format != 1) ULID_ERR << path << ": only PCM WAV is supported";
      if (channels != 1) ULID_ERR << path << ": only mono WAV is supported";
      if (bits != 16) ULID_ERR << path << ": only 16-bit WAV is supported";
      out.sample_rate = static_cast<int>(rate);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      out.samples.resize(size / 2);
      for (size_t i = 0; i < out.samples.size(); ++i) {
        out.samples[i] = static_cast<int16_t>(
            bytes[body + 2 * i] | (bytes[body + 2 * i + 1] << 8));
      }
      have_data = true;
    }
    pos = body + size + (size & 1);  // chunks are word-aligned
  }
  if (!have_fmt || !have_data) {
    ULID_ERR << path << ": missing fmt or data chunk";
  }
  if (out.samples.empty()) ULID_ERR << path << ": empty audio";
  return out;
}

void write_wav(const std::string& path, const WavData& wav) {
  ULID_CHECK(wav.sample_rate > 0) << "write_wav: sample rate not set";
  const uint32_t data_size = static_cast<uint32_t>(wav.samples.size() * 2);
  atomic_write(path, [&](std::ostream& os) {
    os.write("RIFF", 4);
    wr_u32(os, 36 + data_size);
    os.write("WAVE", 4);
    os.write("fmt ", 4);
    wr_u32(os, 16);
    wr_u16(os, 1);  // PCM
    wr_u16(os, 1);  // mono
    wr_u32(os, static_cast<uint32_t>(wav.sample_rate));
    wr_u32(os, static_cast<uint32_t>(wav.sample_rate * 2));  // byte rate
    wr_u16(os, 2);   // block align
    wr_u16(os, 16);  // bits
    os.write("data", 4);
    wr_u32(os, data_size);
    for (int16_t s : wav.samples) {
      const uint16_t u = static_cast<uint16_t>(s);
      unsigned char b[2] = {static_cast<unsigned char>(u & 0xFF),
                            static_cast<unsigned char>((u >> 8) & 0xFF)};
      os.write(reinterpret_cast<char*>(b), 2);
    }
  });
}

}  // namespace ulid
