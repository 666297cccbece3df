// Copyright 2026 The vlmpc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace vlmpc {

/// Outcome of one oracle suite.
struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

/// Critic input Jacobian and loss parameter gradient (data, Jacobian
/// penalty and weight decay terms) against central finite differences of an
/// independent forward-mode evaluation. Passes when at least 99% of the
/// sampled coordinates agree to relative tolerance 1e-4.
CheckResult check_differentiation(std::uint64_t seed, int coordinates = 10000);

/// Random strictly convex box QPs (dimension <= 12) against an exhaustive
/// enumeration of bound patterns. Passes when every solution matches to 1e-8
/// and every `optimal` KKT residual is below 1e-8.
CheckResult check_qp_oracle(std::uint64_t seed, int problems = 500);

/// Frenet round trip (< 1e-12), projection against a brute-force search
/// (< 1e-9) and the heading wrap invariant on random states.
CheckResult check_geometry(std::uint64_t seed, long long states = 1000000);

std::vector<CheckResult> run_all_checks(std::uint64_t seed);

}  // namespace vlmpc
