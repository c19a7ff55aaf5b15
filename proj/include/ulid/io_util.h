// include/ulid/io_util.h

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

#ifndef ULID_IO_UTIL_H_
#define ULID_IO_UTIL_H_

#include <functional>
#include <ostream>
#include <string>

namespace ulid {

// Writes via a temp file in the same directory, then renames into place, so
// readers never observe a partial file.
void atomic_write(const std::string& path,
                  const std::function<void(std::ostream&)>& writer);

bool file_exists(const std::string& path);
void make_dirs(const std::string& path);

// FNV-1a over the given text; hex string. Used for config fingerprints.
std::string fnv1a_hex(const std::string& text);

}  // namespace ulid

#endif  // ULID_IO_UTIL_H_
