// src/tensor.cc

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

#include "ulid/tensor.h"

#include <map>
#include <mutex>
#include <new>
#include <sstream>
#include <vector>

namespace ulid {

namespace {

// Size-bucketed freelist. Blocks round up to the next power of two above
// 4 KiB; smaller requests go straight to the system allocator. The cache is
// capped so long pipelines cannot hoard the machine.
constexpr size_t kPoolMinBytes = 4096;
constexpr size_t kPoolCapBytes = size_t(3) << 30;

struct Pool {
  std::mutex m;
  std::map<size_t, std::vector<void*>> buckets;
  size_t cached = 0;
};

Pool& pool() {
  static Pool* p = new Pool;  // leaked deliberately: outlives all tensors
  return *p;
}

size_t bucket_size(size_t bytes) {
  size_t p2 = kPoolMinBytes;
  while (p2 < bytes) p2 <<= 1;
  // eighth-steps within each power of two keep waste under 12.5%
  const size_t step = p2 / 8;
  return (bytes + step - 1) / step * step;
}

}  // namespace

void* pool_alloc(size_t bytes) {
  if (bytes == 0) bytes = 1;
  if (bytes < kPoolMinBytes) return ::operator new(bytes);
  const size_t b = bucket_size(bytes);
  {
    Pool& p = pool();
    std::lock_guard<std::mutex> lk(p.m);
    auto it = p.buckets.find(b);
    if (it != p.buckets.end() && !it->second.empty()) {
      void* ptr = it->second.back();
      it->second.pop_back();
      p.cached -= b;
      return ptr;
    }
  }
  return ::operator new(b);
}

void pool_free(void* ptr, size_t bytes) {
  if (bytes == 0) bytes = 1;
  if (bytes < kPoolMinBytes) {
    ::operator delete(ptr);
    return;
  }
  const size_t b = bucket_size(bytes);
  {
    Pool& p = pool();
    std::lock_guard<std::mutex> lk(p.m);
    if (p.cached + b <= kPoolCapBytes) {
      p.buckets[b].push_back(ptr);
      p.cached += b;
      return;
    }
  }
  ::operator delete(ptr);
}

size_t pool_cached_bytes() {
  Pool& p = pool();
  std::lock_guard<std::mutex> lk(p.m);
  return p.cached;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << " x ";
    os << s[i];
  }
  os << "]";
  return os.str();
}

int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

template class TensorT<float>;
template class TensorT<double>;
template class TapeT<float>;
template class TapeT<double>;

}  // namespace ulid
