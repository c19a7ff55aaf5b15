// include/ulid/common.h

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

#ifndef ULID_COMMON_H_
#define ULID_COMMON_H_

#include <cstdint>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace ulid {

// All recoverable failures surface as ulid::Error with a descriptive message.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

namespace internal {

// Stream collector that throws (or logs) when it goes out of scope.
class ErrorStream {
 public:
  ErrorStream(const char* file, int line) {
    os_ << file << ":" << line << ": ";
  }
  [[noreturn]] ~ErrorStream() noexcept(false) { throw Error(os_.str()); }
  template <typename T>
  ErrorStream& operator<<(const T& v) {
    os_ << v;
    return *this;
  }

 private:
  std::ostringstream os_;
};

class LogStream {
 public:
  explicit LogStream(const char* tag) { os_ << tag << " "; }
  ~LogStream() { std::cerr << os_.str() << std::endl; }
  template <typename T>
  LogStream& operator<<(const T& v) {
    os_ << v;
    return *this;
  }

 private:
  std::ostringstream os_;
};

}  // namespace internal

}  // namespace ulid

#define ULID_ERR ::ulid::internal::ErrorStream(__FILE__, __LINE__)

#define ULID_CHECK(cond) \
  if (!(cond)) ULID_ERR << "check failed: (" #cond ") "

#define ULID_LOG ::ulid::internal::LogStream("ULID")
#define ULID_WARN ::ulid::internal::LogStream("ULID WARNING:")

#endif  // ULID_COMMON_H_
