#include "guiguard/matcher.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "guiguard/error.hpp"
#include "guiguard/text.hpp"

namespace guiguard {
namespace {

std::u32string prepare(std::string_view s, const MatchConfig& config) {
  std::u32string cps = text::to_code_points(text::normalize(s));
  return config.case_fold ? text::case_fold(cps) : cps;
}

double coverage_of(const std::u32string& ref, const std::u32string& other, CoverageMode mode) {
  if (ref.empty()) return 0.0;
  std::size_t hits = 0;
  if (mode == CoverageMode::kMembership) {
    const std::set<char32_t> alphabet(other.begin(), other.end());
    for (char32_t c : ref) hits += alphabet.count(c);
  } else {
    std::map<char32_t, std::size_t> available;
    for (char32_t c : other) ++available[c];
    for (char32_t c : ref) {
      auto it = available.find(c);
      if (it != available.end() && it->second > 0) {
        --it->second;
        ++hits;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(ref.size());
}

struct Edge {
  int g;
  int p;
  double iou;
};

// Kuhn's augmenting paths restricted to free vertices.
int max_matching(int n_gt, int n_pred, const std::vector<Edge>& edges,
                 const std::vector<char>& gt_blocked, const std::vector<char>& pred_blocked) {
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(n_gt));
  for (const Edge& e : edges) {
    if (!gt_blocked[e.g] && !pred_blocked[e.p]) adj[e.g].push_back(e.p);
  }
  std::vector<int> owner(static_cast<std::size_t>(n_pred), -1);
  std::vector<char> seen;
  auto augment = [&](auto&& self, int g) -> bool {
    for (int p : adj[g]) {
      if (seen[p]) continue;
      seen[p] = 1;
      if (owner[p] < 0 || self(self, owner[p])) {
        owner[p] = g;
        return true;
      }
    }
    return false;
  };
  int size = 0;
  for (int g = 0; g < n_gt; ++g) {
    if (adj[g].empty()) continue;
    seen.assign(static_cast<std::size_t>(n_pred), 0);
    if (augment(augment, g)) ++size;
  }
  return size;
}

}  // namespace

void MatchConfig::validate() const {
  if (!(tau_text > 0.0 && tau_text <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "tau_text must be in (0, 1]");
  }
  if (!(tau_iou > 0.0 && tau_iou <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "tau_iou must be in (0, 1]");
  }
}

double coverage_ratio(std::string_view reference, std::string_view other,
                      const MatchConfig& config) {
  const std::u32string ref = prepare(reference, config);
  if (ref.empty()) throw Error(ErrorCode::kEmptyText, "coverage reference text is empty");
  return coverage_of(ref, prepare(other, config), config.coverage);
}

bool text_match(std::string_view gt_text, std::string_view pred_text, const MatchConfig& config) {
  const std::u32string gt = prepare(gt_text, config);
  if (gt.empty()) throw Error(ErrorCode::kEmptyText, "ground-truth text is empty");
  const std::u32string pred = prepare(pred_text, config);
  const double r1 = coverage_of(gt, pred, config.coverage);
  const double r2 = pred.empty() ? 0.0 : coverage_of(pred, gt, config.coverage);
  return r1 >= config.tau_text || r2 >= config.tau_text;
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  const std::int64_t iw = std::max(0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const std::int64_t ih = std::max(0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const std::int64_t inter = iw * ih;
  const std::int64_t uni = a.area() + b.area() - inter;
  if (uni <= 0) return 0.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

bool iou_match(const BoundingBox& a, const BoundingBox& b, const MatchConfig& config) {
  return iou(a, b) >= config.tau_iou;
}

MatchSet assign_matches(std::span<const PrivacyElement> gt, std::span<const PrivacyElement> pred,
                        const MatchConfig& config) {
  const int n_gt = static_cast<int>(gt.size());
  const int n_pred = static_cast<int>(pred.size());

  std::vector<std::u32string> gt_text, pred_text;
  for (const auto& e : gt) gt_text.push_back(prepare(e.text, config));
  for (const auto& e : pred) pred_text.push_back(prepare(e.text, config));

  std::vector<Edge> edges;
  for (int g = 0; g < n_gt; ++g) {
    if (gt_text[g].empty()) continue;
    for (int p = 0; p < n_pred; ++p) {
      const double v = iou(gt[g].bbox, pred[p].bbox);
      if (v < config.tau_iou) continue;
      const double r1 = coverage_of(gt_text[g], pred_text[p], config.coverage);
      const double r2 = pred_text[p].empty() ? 0.0 : coverage_of(pred_text[p], gt_text[g], config.coverage);
      if (r1 >= config.tau_text || r2 >= config.tau_text) edges.push_back({g, p, v});
    }
  }
  std::stable_sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    if (a.iou != b.iou) return a.iou > b.iou;
    if (a.g != b.g) return a.g < b.g;
    return a.p < b.p;
  });

  std::vector<char> gt_used(static_cast<std::size_t>(n_gt), 0);
  std::vector<char> pred_used(static_cast<std::size_t>(n_pred), 0);
  std::vector<Edge> chosen;

  // Plain greedy first; when it is already maximum it is the answer.
  for (const Edge& e : edges) {
    if (gt_used[e.g] || pred_used[e.p]) continue;
    gt_used[e.g] = pred_used[e.p] = 1;
    chosen.push_back(e);
  }
  const std::vector<char> none_g(static_cast<std::size_t>(n_gt), 0);
  const std::vector<char> none_p(static_cast<std::size_t>(n_pred), 0);
  const int best = max_matching(n_gt, n_pred, edges, none_g, none_p);
  if (static_cast<int>(chosen.size()) < best) {
    chosen.clear();
    std::fill(gt_used.begin(), gt_used.end(), 0);
    std::fill(pred_used.begin(), pred_used.end(), 0);
    for (const Edge& e : edges) {
      if (gt_used[e.g] || pred_used[e.p]) continue;
      gt_used[e.g] = pred_used[e.p] = 1;
      const int rest = max_matching(n_gt, n_pred, edges, gt_used, pred_used);
      if (static_cast<int>(chosen.size()) + 1 + rest == best) {
        chosen.push_back(e);
      } else {
        gt_used[e.g] = pred_used[e.p] = 0;
      }
    }
  }

  MatchSet out;
  for (const Edge& e : chosen) out.pairs.push_back({e.g, e.p, e.iou});
  std::sort(out.pairs.begin(), out.pairs.end(),
            [](const MatchPair& a, const MatchPair& b) { return a.gt_index < b.gt_index; });
  for (int g = 0; g < n_gt; ++g) {
    if (!gt_used[g]) out.unmatched_gt.push_back(g);
  }
  for (int p = 0; p < n_pred; ++p) {
    if (!pred_used[p]) out.unmatched_pred.push_back(p);
  }
  return out;
}

}  // namespace guiguard
