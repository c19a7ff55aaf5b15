// include/ulid/parallel.h

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

#ifndef ULID_PARALLEL_H_
#define ULID_PARALLEL_H_

#include <cstdint>
#include <functional>

namespace ulid {

// Sets the worker count for parallel_for. 0 selects hardware concurrency.
void set_num_workers(int n);
int num_workers();

// Runs fn(i) for i in [0, n). Iterations must write disjoint state; results
// are then identical for every worker count, which is what keeps seeded runs
// reproducible under --workers.
void parallel_for(int64_t n, const std::function<void(int64_t)>& fn);

// Keeps freed activation buffers in the process heap instead of handing the
// pages back to the kernel each training step. Call once at startup.
void tune_allocator();

}  // namespace ulid

#endif  // ULID_PARALLEL_H_
