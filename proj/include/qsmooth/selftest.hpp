/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace qsmooth {

struct SelftestResult {
  /// Phi, Thm1a, Thm1b, Lemma1, Thm2, Thm3a, Thm3b, Thm4, Cor1, Cor2
  std::string id;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

struct SelftestOptions {
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  /// Mutation smoke: evaluate the normal CDF at -x wherever the checks use it.
  bool flip_phi_sign = false;
};

/// Fast invariant checks, one per result. Exceptions inside a check count as failures.
std::vector<SelftestResult> run_selftest(const SelftestOptions& opts);
/// {"version": ..., "pass": bool, "results": [{"id", "pass", "detail", "seconds"}]}
std::string selftest_report_json(const std::vector<SelftestResult>& results);

}  // namespace qsmooth
