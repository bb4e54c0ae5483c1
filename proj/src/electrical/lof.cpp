#include "orbitforge/electrical/lof.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace orbitforge::electrical {

namespace {

struct Neighbourhood {
  double kdist = 0.0;
  std::vector<std::size_t> members;
};

// k-distance and tie-inclusive neighbourhood of `q`, skipping index `self`.
Neighbourhood neighbourhood(std::span<const Feature> pts, const Feature& q, std::size_t k,
                            std::size_t self) {
  std::vector<std::pair<double, std::size_t>> d;
  d.reserve(pts.size());
  for (std::size_t j = 0; j < pts.size(); ++j)
    if (j != self) d.push_back({distance(q, pts[j]), j});
  std::nth_element(d.begin(), d.begin() + static_cast<long>(k - 1), d.end());
  Neighbourhood n;
  n.kdist = d[k - 1].first;
  for (const auto& [dist, j] : d)
    if (dist <= n.kdist) n.members.push_back(j);
  std::sort(n.members.begin(), n.members.end());
  return n;
}

double lrd_of(const Neighbourhood& n, std::span<const Feature> pts, const Feature& q,
              const std::vector<double>& kdist, double floor) {
  double sum = 0.0;
  for (std::size_t j : n.members) sum += std::max({kdist[j], distance(q, pts[j]), floor});
  return static_cast<double>(n.members.size()) / sum;
}

}  // namespace

double distance(const Feature& a, const Feature& b) { return std::hypot(a[0] - b[0], a[1] - b[1]); }

LofModel lof_fit(std::span<const Feature> points, std::size_t k) {
  if (k < 1) throw InsufficientData("LOF needs k >= 1");
  if (points.size() <= k)
    throw InsufficientData("LOF needs more than k = " + std::to_string(k) + " points, got " +
                           std::to_string(points.size()));
  LofModel m;
  m.k_ = k;
  m.points_.assign(points.begin(), points.end());
  double scale = 1.0;
  for (const auto& p : points) scale = std::max({scale, std::abs(p[0]), std::abs(p[1])});
  m.floor_ = 64.0 * std::numeric_limits<double>::epsilon() * scale;

  const std::size_t n = points.size();
  if (std::all_of(points.begin(), points.end(), [&](const Feature& p) { return p == points[0]; }))
    throw DegenerateData("all training points coincide");
  std::vector<Neighbourhood> hoods(n);
  m.kdist_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    hoods[i] = neighbourhood(points, points[i], k, i);
    m.kdist_[i] = std::max(hoods[i].kdist, m.floor_);
  }
  m.lrd_.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    m.lrd_[i] = lrd_of(hoods[i], points, points[i], m.kdist_, m.floor_);
  m.train_lof_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j : hoods[i].members) s += m.lrd_[j];
    m.train_lof_[i] = s / (static_cast<double>(hoods[i].members.size()) * m.lrd_[i]);
  }
  return m;
}

double lof_score(const LofModel& m, const Feature& q) {
  const Neighbourhood hood = neighbourhood(m.points_, q, m.k_, m.points_.size());
  const double lrd_q = lrd_of(hood, m.points_, q, m.kdist_, m.floor_);
  double s = 0.0;
  for (std::size_t j : hood.members) s += m.lrd_[j];
  return s / (static_cast<double>(hood.members.size()) * lrd_q);
}

std::vector<Feature> clean_training(std::span<const Feature> points, std::size_t k, double cutoff) {
  std::vector<Feature> cur(points.begin(), points.end());
  while (true) {
    if (cur.size() <= k)
      throw OverCleaned("cleaning left " + std::to_string(cur.size()) + " points, need at least " +
                        std::to_string(k + 1));
    const LofModel m = lof_fit(cur, k);
    std::vector<Feature> kept;
    for (std::size_t i = 0; i < cur.size(); ++i)
      if (m.training_score(i) <= cutoff) kept.push_back(cur[i]);
    if (kept.size() == cur.size()) return cur;
    if (kept.size() <= k)
      throw OverCleaned("cleaning left " + std::to_string(kept.size()) + " points, need at least " +
                        std::to_string(k + 1));
    cur = std::move(kept);
  }
}

}  // namespace orbitforge::electrical
