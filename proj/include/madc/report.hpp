// Copyright 2026 The madc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MADC_REPORT_HPP
#define MADC_REPORT_HPP

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "madc/experiment.hpp"

namespace madc {

/// Mean over seeds of the per-run mean AP, keyed by (variant, K).
std::map<std::pair<std::string, int>, double> aggregate(const std::vector<ResultRow>& rows);

struct TrendCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};

/// Few-shot trends (adaptation over source-only, bounded by target
/// training, non-decreasing with K, not worse than fine-tuning) and the
/// 1-shot ablation ordering. Checks whose rows are missing fail.
std::vector<TrendCheck> trend_checks(const std::vector<ResultRow>& rows);

std::string summary_markdown(const std::vector<ResultRow>& rows, const std::vector<TrendCheck>& checks,
                             const std::vector<std::string>& notes = {});

/// Grouped bar chart of mean AP against K, one bar per variant.
std::string ap_chart_svg(const std::vector<ResultRow>& rows);

}  // namespace madc

#endif  // MADC_REPORT_HPP
