// include/ulid/gradcheck.h

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

#ifndef ULID_GRADCHECK_H_
#define ULID_GRADCHECK_H_

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "ulid/tensor.h"

namespace ulid {

struct GradCheckEntry {
  std::string param;
  int64_t index = 0;
  double analytic = 0;
  double numeric = 0;
  double rel_err = 0;
};

struct GradCheckReport {
  double tol = 0;
  double max_rel_err = 0;
  int64_t n_checked = 0;
  std::vector<GradCheckEntry> violations;
  bool pass() const { return violations.empty(); }
  std::string summary() const;
};

// Compares every scalar of every listed parameter against a central finite
// difference of the loss: |analytic - numeric| / max(1, |analytic|) <= tol.
// build_loss must construct a fresh graph on each call and return the scalar
// loss; it sees a null tape during the plain numeric evaluations. 64-bit only:
// central differences are not trustworthy in single precision.
GradCheckReport check_gradients(
    const std::function<TensorPtrD(TapeD*)>& build_loss,
    const std::vector<std::pair<std::string, TensorPtrD>>& params, double eps,
    double tol);

}  // namespace ulid

#endif  // ULID_GRADCHECK_H_
