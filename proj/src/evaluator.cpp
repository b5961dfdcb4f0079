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

#include "madc/evaluator.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <sstream>
#include <thread>
#include <tuple>

#include "madc/datamodel.hpp"

namespace madc {

Eigen::MatrixXd iou_matrix(const InstanceMask& gt, const InstanceMask& pred) {
  require_same_shape(pred.labels, gt.height(), gt.width(), "iou_matrix masks");
  const Eigen::Index ng = gt.count, np = pred.count;
  Eigen::MatrixXd inter = Eigen::MatrixXd::Zero(ng + 1, np + 1);
  for (Eigen::Index i = 0; i < gt.labels.size(); ++i)
    inter(gt.labels.data()[i], pred.labels.data()[i]) += 1.0;
  const Eigen::VectorXd area_g = inter.rowwise().sum();
  const Eigen::RowVectorXd area_p = inter.colwise().sum();
  Eigen::MatrixXd iou = Eigen::MatrixXd::Zero(ng, np);
  for (Eigen::Index a = 1; a <= ng; ++a)
    for (Eigen::Index b = 1; b <= np; ++b) {
      const double n = inter(a, b);
      if (n > 0) iou(a - 1, b - 1) = n / (area_g(a) + area_p(b) - n);
    }
  return iou;
}

MatchScore match_and_score(const InstanceMask& gt, const InstanceMask& pred, double thr) {
  const auto iou = iou_matrix(gt, pred);
  std::vector<std::tuple<double, Eigen::Index, Eigen::Index>> cand;
  for (Eigen::Index a = 0; a < iou.rows(); ++a)
    for (Eigen::Index b = 0; b < iou.cols(); ++b)
      if (iou(a, b) >= thr && iou(a, b) > 0) cand.emplace_back(iou(a, b), a, b);
  std::sort(cand.begin(), cand.end(), [](const auto& x, const auto& y) {
    if (std::get<0>(x) != std::get<0>(y)) return std::get<0>(x) > std::get<0>(y);
    return std::tie(std::get<1>(x), std::get<2>(x)) < std::tie(std::get<1>(y), std::get<2>(y));
  });
  std::vector<char> used_g(static_cast<std::size_t>(iou.rows()), 0), used_p(static_cast<std::size_t>(iou.cols()), 0);
  MatchScore s;
  for (const auto& [v, a, b] : cand) {
    if (used_g[a] || used_p[b]) continue;
    used_g[a] = used_p[b] = 1;
    ++s.tp;
  }
  s.fp = static_cast<int>(pred.count) - s.tp;
  s.fn = static_cast<int>(gt.count) - s.tp;
  const int denom = s.tp + s.fp + s.fn;
  s.ap = denom == 0 ? 1.0 : static_cast<double>(s.tp) / denom;
  return s;
}

EvalReport score_masks(const std::vector<InstanceMask>& gt, const std::vector<InstanceMask>& pred, double thr) {
  require(!gt.empty(), "cannot score an empty dataset");
  require(gt.size() == pred.size(), "ground truth and prediction counts differ");
  EvalReport r;
  long tp = 0, all = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    ImageScore s{i, gt[i].count, pred[i].count, match_and_score(gt[i], pred[i], thr)};
    tp += s.score.tp;
    all += s.score.tp + s.score.fp + s.score.fn;
    r.mean_ap += s.score.ap;
    r.per_image.push_back(s);
  }
  r.mean_ap /= static_cast<double>(gt.size());
  r.pooled_ap = all == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(all);
  return r;
}

EvalReport evaluate_dataset(const Network<float>& net, const Params<float>& params, const Dataset& ds,
                            const HeadConfig& head, int threads) {
  require(!ds.empty(), "cannot evaluate an empty dataset");
  std::vector<InstanceMask> gt, pred(ds.size());
  for (const auto& s : ds.items) gt.push_back(s.mask);
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(ds.size());
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < ds.size();) {
      try {
        pred[i] = segment(net.forward(params, ds.items[i].image.pixels), head);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int n = std::clamp(threads, 1, static_cast<int>(ds.size()));
  if (n == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return score_masks(gt, pred);
}

std::string report_csv(const EvalReport& r) {
  std::ostringstream os;
  os.precision(17);
  os << "image_id,n_gt,n_pred,tp,fp,fn,ap\n";
  for (const auto& s : r.per_image)
    os << s.image_id << ',' << s.n_gt << ',' << s.n_pred << ',' << s.score.tp << ',' << s.score.fp << ','
       << s.score.fn << ',' << s.score.ap << '\n';
  return os.str();
}

void write_report_csv(const EvalReport& r, const std::filesystem::path& path) {
  const auto text = report_csv(r);
  write_file(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

}  // namespace madc
