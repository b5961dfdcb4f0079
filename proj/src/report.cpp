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

#include "madc/report.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

namespace madc {
namespace {

using Table = std::map<std::pair<std::string, int>, double>;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

const double* find(const Table& t, const std::string& variant, int k) {
  auto it = t.find({variant, k});
  return it == t.end() ? nullptr : &it->second;
}

// a >= b + slack, with both operands looked up; missing rows fail.
TrendCheck at_least(const Table& t, std::string name, const std::string& va, int ka, const std::string& vb, int kb,
                    double slack) {
  TrendCheck c{std::move(name), false, ""};
  const double* a = find(t, va, ka);
  const double* b = find(t, vb, kb);
  if (!a || !b) {
    c.detail = "missing rows for " + va + "@" + std::to_string(ka) + " or " + vb + "@" + std::to_string(kb);
    return c;
  }
  c.pass = *a >= *b + slack;
  std::ostringstream os;
  os << va << "(K=" << ka << ")=" << fmt(*a) << " vs " << vb << "(K=" << kb << ")=" << fmt(*b);
  if (slack != 0) os << (slack > 0 ? " + " : " - ") << fmt(std::abs(slack));
  c.detail = os.str();
  return c;
}

TrendCheck all_of(std::string name, const std::vector<TrendCheck>& parts) {
  TrendCheck c{std::move(name), !parts.empty(), ""};
  for (const auto& p : parts) {
    c.pass = c.pass && p.pass;
    if (!c.detail.empty()) c.detail += "; ";
    c.detail += p.detail;
  }
  if (parts.empty()) c.detail = "no rows";
  return c;
}

std::vector<int> ks_of(const std::vector<ResultRow>& rows, const std::string& variant) {
  std::set<int> ks;
  for (const auto& r : rows)
    if (r.variant == variant) ks.insert(r.k);
  return {ks.begin(), ks.end()};
}

}  // namespace

std::map<std::pair<std::string, int>, double> aggregate(const std::vector<ResultRow>& rows) {
  std::map<std::pair<std::string, int>, std::pair<double, int>> acc;
  for (const auto& r : rows) {
    auto& a = acc[{r.variant, r.k}];
    a.first += r.mean_ap;
    a.second += 1;
  }
  Table t;
  for (const auto& [key, v] : acc) t[key] = v.first / v.second;
  return t;
}

std::vector<TrendCheck> trend_checks(const std::vector<ResultRow>& rows) {
  const Table t = aggregate(rows);
  std::vector<TrendCheck> out;
  out.push_back(at_least(t, "1-shot adaptation beats source-only by 0.10", kVariantAdapt, 1, kVariantLb, 1, 0.10));

  std::vector<TrendCheck> below_ub;
  for (int k : ks_of(rows, kVariantAdapt)) below_ub.push_back(at_least(t, "", kVariantUb, k, kVariantAdapt, k, 0.0));
  out.push_back(all_of("adaptation stays at or below the target-trained bound", below_ub));

  out.push_back(at_least(t, "5-shot not worse than 1-shot by more than 0.03", kVariantAdapt, 5, kVariantAdapt, 1, -0.03));

  std::vector<TrendCheck> vs_ft;
  for (int k : {1, 3, 5}) vs_ft.push_back(at_least(t, "", kVariantAdapt, k, kVariantFt, k, -0.02));
  out.push_back(all_of("adaptation not worse than fine-tuning by more than 0.02 (K=1,3,5)", vs_ft));

  out.push_back(at_least(t, "full method vs. no boundary loss (-0.02)", kVariantAdapt, 1, kVariantNoCb, 1, -0.02));
  out.push_back(at_least(t, "full method vs. no distance loss (-0.02)", kVariantAdapt, 1, kVariantNoCd, 1, -0.02));
  out.push_back(at_least(t, "full method vs. neither contrastive loss", kVariantAdapt, 1, kVariantNoBoth, 1, 0.0));

  TrendCheck same{"no-both ablation reproduces fine-tuning", false, ""};
  std::map<std::pair<int, std::uint64_t>, const ResultRow*> ft;
  for (const auto& r : rows)
    if (r.variant == kVariantFt) ft[{r.k, r.seed}] = &r;
  int compared = 0, equal = 0;
  for (const auto& r : rows) {
    if (r.variant != kVariantNoBoth) continue;
    auto it = ft.find({r.k, r.seed});
    if (it == ft.end()) continue;
    ++compared;
    equal += r.mean_ap == it->second->mean_ap && r.pooled_ap == it->second->pooled_ap;
  }
  same.pass = compared > 0 && equal == compared;
  same.detail = std::to_string(equal) + "/" + std::to_string(compared) + " runs with identical AP";
  out.push_back(same);
  return out;
}

std::string summary_markdown(const std::vector<ResultRow>& rows, const std::vector<TrendCheck>& checks,
                             const std::vector<std::string>& notes) {
  const Table t = aggregate(rows);
  std::vector<std::string> variants;
  std::set<int> kset;
  std::map<std::string, std::set<std::uint64_t>> seeds;
  for (const auto& r : rows) {
    if (std::find(variants.begin(), variants.end(), r.variant) == variants.end()) variants.push_back(r.variant);
    kset.insert(r.k);
    seeds[r.variant].insert(r.seed);
  }
  std::ostringstream os;
  os << "# Experiment summary\n\nMean AP@0.5 on the target test split, averaged over seeds.\n\n| variant |";
  for (int k : kset) os << ' ' << k << "-shot |";
  os << " seeds |\n|---|";
  for (std::size_t i = 0; i < kset.size(); ++i) os << "---:|";
  os << "---:|\n";
  for (const auto& v : variants) {
    os << "| " << v << " |";
    for (int k : kset) {
      const double* x = find(t, v, k);
      os << ' ' << (x ? fmt(*x) : std::string("")) << " |";
    }
    os << ' ' << seeds[v].size() << " |\n";
  }
  os << "\n## Trend checks\n\n";
  for (const auto& c : checks) os << "- " << (c.pass ? "PASS" : "FAIL") << " " << c.name << ": " << c.detail << "\n";
  if (!notes.empty()) {
    os << "\n## Notes\n\n";
    for (const auto& n : notes) os << "- " << n << "\n";
  }
  return os.str();
}

std::string ap_chart_svg(const std::vector<ResultRow>& rows) {
  const Table t = aggregate(rows);
  std::vector<std::string> variants;
  std::set<int> kset;
  for (const auto& r : rows) {
    if (std::find(variants.begin(), variants.end(), r.variant) == variants.end()) variants.push_back(r.variant);
    kset.insert(r.k);
  }
  static const char* colors[] = {"#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#9c755f"};
  const int left = 60, top = 30, plot_h = 260, bar_w = 14, gap = 24;
  const int group_w = static_cast<int>(variants.size()) * bar_w + gap;
  const int plot_w = std::max(1, static_cast<int>(kset.size())) * group_w;
  const int width = left + plot_w + 170, height = top + plot_h + 60;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << left << "\" y=\"18\" font-size=\"13\">Mean AP@0.5 vs. K</text>\n";
  for (int i = 0; i <= 5; ++i) {
    const double v = i / 5.0;
    const int y = top + plot_h - static_cast<int>(v * plot_h);
    os << "<line x1=\"" << left << "\" y1=\"" << y << "\" x2=\"" << left + plot_w << "\" y2=\"" << y
       << "\" stroke=\"#ddd\"/>\n";
    os << "<text x=\"" << left - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">" << fmt(v).substr(0, 3) << "</text>\n";
  }
  os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + plot_h
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << left + plot_w << "\" y2=\""
     << top + plot_h << "\" stroke=\"black\"/>\n";
  int g = 0;
  for (int k : kset) {
    const int gx = left + g * group_w + gap / 2;
    for (std::size_t v = 0; v < variants.size(); ++v) {
      const double* x = find(t, variants[v], k);
      if (!x) continue;
      const int h = static_cast<int>(std::clamp(*x, 0.0, 1.0) * plot_h);
      os << "<rect x=\"" << gx + static_cast<int>(v) * bar_w << "\" y=\"" << top + plot_h - h << "\" width=\""
         << bar_w - 2 << "\" height=\"" << h << "\" fill=\"" << colors[v % 8] << "\"><title>" << variants[v]
         << " K=" << k << ": " << fmt(*x) << "</title></rect>\n";
    }
    os << "<text x=\"" << gx + static_cast<int>(variants.size()) * bar_w / 2 << "\" y=\"" << top + plot_h + 16
       << "\" text-anchor=\"middle\">" << k << "-shot</text>\n";
    ++g;
  }
  for (std::size_t v = 0; v < variants.size(); ++v) {
    const int y = top + 10 + static_cast<int>(v) * 18;
    os << "<rect x=\"" << left + plot_w + 16 << "\" y=\"" << y - 9 << "\" width=\"10\" height=\"10\" fill=\""
       << colors[v % 8] << "\"/>\n";
    os << "<text x=\"" << left + plot_w + 32 << "\" y=\"" << y << "\">" << variants[v] << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace madc
