#pragma once

// Clustering of misalignment points: embed descriptions, run seeded k-means
// over a range of k, pick the k with the best mean silhouette, and report
// exemplars per cluster. Deterministic for a fixed seed and input order.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "maple/errors.hpp"
#include "maple/gateway.hpp"
#include "maple/log.hpp"
#include "maple/stage1.hpp"

namespace maple {

struct ClusterMember {
  std::string problem_id;
  std::string description;
  double distance_to_centroid = 0.0;
};

struct Cluster {
  int index = 0;
  std::vector<double> centroid;
  std::vector<ClusterMember> members;    // every point assigned to this cluster
  std::vector<ClusterMember> exemplars;  // up to 3 nearest the centroid
};

struct ClusterReport {
  int chosen_k = 0;
  double silhouette = 0.0;
  std::uint64_t seed = 0;
  std::vector<Cluster> clusters;
  std::vector<int> assignment;  // cluster index per input point
};

inline void to_json(nlohmann::json& j, const ClusterMember& m) {
  j = nlohmann::json{{"problem_id", m.problem_id},
                     {"description", m.description},
                     {"distance_to_centroid", m.distance_to_centroid}};
}

inline void to_json(nlohmann::json& j, const Cluster& c) {
  j = nlohmann::json{{"index", c.index},
                     {"size", c.members.size()},
                     {"members", c.members},
                     {"exemplars", c.exemplars}};
}

inline void to_json(nlohmann::json& j, const ClusterReport& r) {
  j = nlohmann::json{{"chosen_k", r.chosen_k},
                     {"silhouette", r.silhouette},
                     {"seed", r.seed},
                     {"clusters", r.clusters},
                     {"assignment", r.assignment}};
}

namespace detail {

inline double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

struct KMeansResult {
  std::vector<std::vector<double>> centroids;
  std::vector<int> assignment;
};

// Standard Lloyd iterations with k-means++ seeding. Ties in assignment break
// toward the lower cluster index so reruns agree exactly.
inline KMeansResult kmeans(const std::vector<std::vector<double>>& points, int k,
                           std::mt19937_64& rng, int max_iters = 100) {
  const size_t n = points.size();
  KMeansResult result;
  result.centroids.reserve(static_cast<size_t>(k));

  std::uniform_int_distribution<size_t> first(0, n - 1);
  result.centroids.push_back(points[first(rng)]);
  std::vector<double> best_sq(n, std::numeric_limits<double>::max());
  while (result.centroids.size() < static_cast<size_t>(k)) {
    double total = 0.0;
    for (size_t i = 0; i < n; ++i) {
      best_sq[i] = std::min(best_sq[i], sq_dist(points[i], result.centroids.back()));
      total += best_sq[i];
    }
    size_t pick = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng);
      double running = 0.0;
      for (size_t i = 0; i < n; ++i) {
        running += best_sq[i];
        if (running >= target) {
          pick = i;
          break;
        }
      }
    } else {
      pick = first(rng);  // all points identical; any choice is equivalent
    }
    result.centroids.push_back(points[pick]);
  }

  result.assignment.assign(n, 0);
  for (int iter = 0; iter < max_iters; ++iter) {
    bool moved = false;
    for (size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::max();
      for (int c = 0; c < k; ++c) {
        double d = sq_dist(points[i], result.centroids[static_cast<size_t>(c)]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (best != result.assignment[i]) {
        result.assignment[i] = best;
        moved = true;
      }
    }
    std::vector<std::vector<double>> sums(static_cast<size_t>(k),
                                          std::vector<double>(points[0].size(), 0.0));
    std::vector<size_t> counts(static_cast<size_t>(k), 0);
    for (size_t i = 0; i < n; ++i) {
      auto& s = sums[static_cast<size_t>(result.assignment[i])];
      for (size_t d = 0; d < s.size(); ++d) s[d] += points[i][d];
      ++counts[static_cast<size_t>(result.assignment[i])];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<size_t>(c)] == 0) continue;  // empty cluster keeps its centroid
      auto& cent = result.centroids[static_cast<size_t>(c)];
      for (size_t d = 0; d < cent.size(); ++d)
        cent[d] = sums[static_cast<size_t>(c)][d] / static_cast<double>(counts[static_cast<size_t>(c)]);
    }
    if (!moved && iter > 0) break;
  }
  return result;
}

// Mean silhouette over all points. Singleton clusters contribute 0 by
// convention; a degenerate clustering therefore scores poorly, not NaN.
inline double mean_silhouette(const std::vector<std::vector<double>>& points,
                              const std::vector<int>& assignment, int k) {
  const size_t n = points.size();
  std::vector<size_t> sizes(static_cast<size_t>(k), 0);
  for (int a : assignment) ++sizes[static_cast<size_t>(a)];

  double total = 0.0;
  for (size_t i = 0; i < n; ++i) {
    int own = assignment[i];
    if (sizes[static_cast<size_t>(own)] <= 1) continue;  // contributes 0
    std::vector<double> mean_dist(static_cast<size_t>(k), 0.0);
    for (size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      mean_dist[static_cast<size_t>(assignment[j])] += std::sqrt(sq_dist(points[i], points[j]));
    }
    double a = mean_dist[static_cast<size_t>(own)] /
               static_cast<double>(sizes[static_cast<size_t>(own)] - 1);
    double b = std::numeric_limits<double>::max();
    for (int c = 0; c < k; ++c) {
      if (c == own || sizes[static_cast<size_t>(c)] == 0) continue;
      b = std::min(b, mean_dist[static_cast<size_t>(c)] / static_cast<double>(sizes[static_cast<size_t>(c)]));
    }
    if (b == std::numeric_limits<double>::max()) continue;
    double denom = std::max(a, b);
    if (denom > 0.0) total += (b - a) / denom;
  }
  return total / static_cast<double>(n);
}

}  // namespace detail

struct ClusterOptions {
  int k_min = 2;
  int k_max = 8;
  std::uint64_t seed = 0;
  int restarts = 4;  // k-means++ restarts per k; best inertia wins
};

// Embeds every description in one batch and clusters. Requires at least three
// points; k range is clamped to [2, n-1].
inline ClusterReport cluster_failures(const std::vector<MisalignmentPoint>& points,
                                      Gateway& gateway, const ModelConfig& embedder,
                                      const ClusterOptions& opts = {}) {
  if (points.size() < 3)
    throw Error(ErrorCode::InsufficientData,
                "clustering needs at least 3 misalignment points, got " +
                    std::to_string(points.size()));

  std::vector<std::string> texts;
  texts.reserve(points.size());
  for (const auto& p : points) texts.push_back(p.description);
  std::vector<EmbeddingVector> embeddings = gateway.embed(embedder, texts);

  std::vector<std::vector<double>> vecs;
  vecs.reserve(embeddings.size());
  for (auto& e : embeddings) vecs.push_back(std::move(e.values));

  // All-identical embeddings make every k equivalent; warn and use k_min.
  bool degenerate = std::all_of(vecs.begin(), vecs.end(),
                                [&](const std::vector<double>& v) { return v == vecs[0]; });
  if (degenerate) warn("all embeddings identical; clustering output is arbitrary");

  const int n = static_cast<int>(points.size());
  int k_lo = std::max(2, opts.k_min);
  int k_hi = std::min(opts.k_max, n - 1);
  if (k_hi < k_lo) k_hi = k_lo;
  if (k_hi > n - 1) k_hi = std::max(2, n - 1);
  k_lo = std::min(k_lo, k_hi);

  std::mt19937_64 rng(opts.seed);
  ClusterReport report;
  report.seed = opts.seed;
  double best_sil = -2.0;
  detail::KMeansResult best;

  for (int k = k_lo; k <= k_hi; ++k) {
    detail::KMeansResult round_best;
    double round_inertia = std::numeric_limits<double>::max();
    for (int r = 0; r < std::max(1, opts.restarts); ++r) {
      auto res = detail::kmeans(vecs, k, rng);
      double inertia = 0.0;
      for (size_t i = 0; i < vecs.size(); ++i)
        inertia += detail::sq_dist(vecs[i], res.centroids[static_cast<size_t>(res.assignment[i])]);
      if (inertia < round_inertia) {
        round_inertia = inertia;
        round_best = std::move(res);
      }
    }
    double sil = detail::mean_silhouette(vecs, round_best.assignment, k);
    if (sil > best_sil) {
      best_sil = sil;
      report.chosen_k = k;
      best = std::move(round_best);
    }
  }

  report.silhouette = best_sil;
  report.assignment = best.assignment;
  report.clusters.resize(static_cast<size_t>(report.chosen_k));
  for (int c = 0; c < report.chosen_k; ++c) {
    report.clusters[static_cast<size_t>(c)].index = c;
    report.clusters[static_cast<size_t>(c)].centroid = best.centroids[static_cast<size_t>(c)];
  }
  for (size_t i = 0; i < points.size(); ++i) {
    int c = best.assignment[i];
    ClusterMember m;
    m.problem_id = points[i].problem_id;
    m.description = points[i].description;
    m.distance_to_centroid =
        std::sqrt(detail::sq_dist(vecs[i], best.centroids[static_cast<size_t>(c)]));
    report.clusters[static_cast<size_t>(c)].members.push_back(std::move(m));
  }
  for (auto& cluster : report.clusters) {
    auto sorted = cluster.members;
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const ClusterMember& a, const ClusterMember& b) {
                       return a.distance_to_centroid < b.distance_to_centroid;
                     });
    if (sorted.size() > 3) sorted.resize(3);
    cluster.exemplars = std::move(sorted);
  }
  return report;
}

}  // namespace maple
