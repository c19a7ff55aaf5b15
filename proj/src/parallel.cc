// src/parallel.cc

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

#include "ulid/parallel.h"

#include <atomic>
#include <condition_variable>
#include <mutex>
#include <thread>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace ulid {

namespace {

int g_workers = 0;

struct Pool {
  explicit Pool(int n_threads) {
    for (int i = 0; i < n_threads; ++i) {
      threads.emplace_back([this] { worker_loop(); });
    }
  }

  ~Pool() {
    {
      std::unique_lock<std::mutex> lk(m);
      stop = true;
    }
    cv.notify_all();
    for (auto& t : threads) t.join();
  }

  void run(int64_t n, const std::function<void(int64_t)>& fn) {
    std::unique_lock<std::mutex> lk(m);
    job = &fn;
    job_size = n;
    next.store(0, std::memory_order_relaxed);
    pending = static_cast<int>(threads.size());
    ++generation;
    cv.notify_all();
    // The caller participates too.
    lk.unlock();
    drain(n, fn);
    lk.lock();
    done_cv.wait(lk, [this] { return pending == 0; });
    job = nullptr;
  }

  void drain(int64_t n, const std::function<void(int64_t)>& fn) {
    for (;;) {
      int64_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= n) break;
      fn(i);
    }
  }

  void worker_loop() {
    uint64_t seen = 0;
    for (;;) {
      const std::function<void(int64_t)>* f = nullptr;
      int64_t n = 0;
      {
        std::unique_lock<std::mutex> lk(m);
        cv.wait(lk, [&] { return stop || generation != seen; });
        if (stop) return;
        seen = generation;
        f = job;
        n = job_size;
      }
      if (f) drain(n, *f);
      {
        std::unique_lock<std::mutex> lk(m);
        if (--pending == 0) done_cv.notify_all();
      }
    }
  }

  std::vector<std::thread> threads;
  std::mutex m;
  std::condition_variable cv, done_cv;
  const std::function<void(int64_t)>* job = nullptr;
  int64_t job_size = 0;
  std::atomic<int64_t> next{0};
  int pending = 0;
  uint64_t generation = 0;
  bool stop = false;
};

Pool* g_pool = nullptr;
int g_pool_threads = -1;

void ensure_pool(int extra_threads) {
  if (g_pool_threads != extra_threads) {
    delete g_pool;
    g_pool = extra_threads > 0 ? new Pool(extra_threads) : nullptr;
    g_pool_threads = extra_threads;
  }
}

}  // namespace

void tune_allocator() {
#if defined(__GLIBC__)
  // Training allocates and frees ~GB-scale activation buffers every step;
  // without these the pages go back to the kernel and refault each time.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

void set_num_workers(int n) { g_workers = n; }

int num_workers() {
  if (g_workers > 0) return g_workers;
  unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

void parallel_for(int64_t n, const std::function<void(int64_t)>& fn) {
  if (n <= 0) return;
  int workers = num_workers();
  if (workers <= 1 || n == 1) {
    for (int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  ensure_pool(workers - 1);
  if (g_pool == nullptr) {
    for (int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  g_pool->run(n, fn);
}

}  // namespace ulid
