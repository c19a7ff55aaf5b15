// src/gradcheck.cc

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

#include "ulid/gradcheck.h"

#include <cmath>
#include <sstream>

namespace ulid {

std::string GradCheckReport::summary() const {
  std::ostringstream os;
  os << "checked " << n_checked << " parameter scalars, max rel err "
     << max_rel_err << " (tol " << tol << "): "
     << (violations.empty() ? "pass" : "FAIL");
  for (size_t i = 0; i < violations.size() && i < 10; ++i) {
    const auto& v = violations[i];
    os << "\n  " << v.param << "[" << v.index << "] analytic " << v.analytic
       << " numeric " << v.numeric << " rel err " << v.rel_err;
  }
  if (violations.size() > 10) {
    os << "\n  ... " << (violations.size() - 10) << " more";
  }
  return os.str();
}

GradCheckReport check_gradients(
    const std::function<TensorPtrD(TapeD*)>& build_loss,
    const std::vector<std::pair<std::string, TensorPtrD>>& params, double eps,
    double tol) {
  GradCheckReport report;
  report.tol = tol;

  // One recorded pass for the analytic gradients.
  for (const auto& [name, p] : params) {
    p->requires_grad = true;
    p->zero_grad();
    (void)p->grad();
  }
  {
    TapeD tape;
    auto loss = build_loss(&tape);
    tape.backward_from(loss);
  }
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const auto& [name, p] : params) {
    analytic.emplace_back(p->grad(), p->grad() + p->numel());
  }

  for (size_t pi = 0; pi < params.size(); ++pi) {
    const auto& [name, p] = params[pi];
    for (int64_t i = 0; i < p->numel(); ++i) {
      const double saved = p->at(i);
      p->at(i) = saved + eps;
      const double up = build_loss(nullptr)->at(0);
      p->at(i) = saved - eps;
      const double dn = build_loss(nullptr)->at(0);
      p->at(i) = saved;
      const double numeric = (up - dn) / (2 * eps);
      const double a = analytic[pi][i];
      const double rel = std::abs(a - numeric) / std::max(1.0, std::abs(a));
      report.max_rel_err = std::max(report.max_rel_err, rel);
      ++report.n_checked;
      if (!(rel <= tol) || !std::isfinite(rel)) {
        report.violations.push_back({name, i, a, numeric, rel});
      }
    }
  }
  return report;
}

}  // namespace ulid
