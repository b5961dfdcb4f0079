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

#ifndef MADC_EVALUATOR_HPP
#define MADC_EVALUATOR_HPP

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "madc/net.hpp"
#include "madc/segmenter.hpp"
#include "madc/types.hpp"

namespace madc {

/// Rows are ground-truth instances 1..N_gt, columns predictions 1..N_pred.
Eigen::MatrixXd iou_matrix(const InstanceMask& gt, const InstanceMask& pred);

struct MatchScore {
  int tp = 0;
  int fp = 0;
  int fn = 0;
  double ap = 0.0;  ///< TP / (TP + FP + FN); 1 when both masks are empty
};

/// Greedy one-to-one matching over IoU entries in descending order, ties by
/// (gt, pred) ascending; a pair matches when IoU >= thr.
MatchScore match_and_score(const InstanceMask& gt, const InstanceMask& pred, double thr = 0.5);

struct ImageScore {
  std::size_t image_id = 0;
  std::uint32_t n_gt = 0;
  std::uint32_t n_pred = 0;
  MatchScore score;
};

struct EvalReport {
  std::vector<ImageScore> per_image;
  double mean_ap = 0.0;    ///< mean of per-image AP (headline)
  double pooled_ap = 0.0;  ///< sum TP / sum (TP + FP + FN)
};

EvalReport score_masks(const std::vector<InstanceMask>& gt, const std::vector<InstanceMask>& pred,
                       double thr = 0.5);

/// Segments every image of `ds` with the model and scores against its masks.
/// `threads` > 1 runs images concurrently; results do not depend on it.
EvalReport evaluate_dataset(const Network<float>& net, const Params<float>& params, const Dataset& ds,
                            const HeadConfig& head, int threads = 1);

/// CSV columns: image_id,n_gt,n_pred,tp,fp,fn,ap
std::string report_csv(const EvalReport& r);
void write_report_csv(const EvalReport& r, const std::filesystem::path& path);

}  // namespace madc

#endif  // MADC_EVALUATOR_HPP
