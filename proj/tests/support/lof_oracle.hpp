#pragma once

// Textbook LOF written directly from the definitions, O(n^2) per query and
// without any caching, for cross-checking the library.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

namespace oracle {

using P = std::array<double, 2>;

inline double dist(const P& a, const P& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1];
  return std::sqrt(dx * dx + dy * dy);
}

// k-distance of q w.r.t. pts, ignoring index `skip` (pass pts.size() for none).
inline double kdist(const std::vector<P>& pts, const P& q, std::size_t k, std::size_t skip) {
  std::vector<double> d;
  for (std::size_t j = 0; j < pts.size(); ++j)
    if (j != skip) d.push_back(dist(q, pts[j]));
  std::sort(d.begin(), d.end());
  return d[k - 1];
}

inline std::vector<std::size_t> hood(const std::vector<P>& pts, const P& q, std::size_t k,
                                     std::size_t skip) {
  const double kd = kdist(pts, q, k, skip);
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < pts.size(); ++j)
    if (j != skip && dist(q, pts[j]) <= kd) out.push_back(j);
  return out;
}

inline double reach(const std::vector<P>& pts, const P& a, std::size_t b, std::size_t k) {
  return std::max(kdist(pts, pts[b], k, b), dist(a, pts[b]));
}

inline double lrd(const std::vector<P>& pts, const P& q, std::size_t k, std::size_t skip) {
  const auto h = hood(pts, q, k, skip);
  double s = 0.0;
  for (std::size_t j : h) s += reach(pts, q, j, k);
  return static_cast<double>(h.size()) / s;
}

inline double lof(const std::vector<P>& pts, const P& q, std::size_t k, std::size_t skip) {
  const auto h = hood(pts, q, k, skip);
  const double own = lrd(pts, q, k, skip);
  double s = 0.0;
  for (std::size_t j : h) s += lrd(pts, pts[j], k, j);
  return s / (static_cast<double>(h.size()) * own);
}

// Novelty score of an outside query.
inline double lof_query(const std::vector<P>& pts, const P& q, std::size_t k) {
  return lof(pts, q, k, pts.size());
}

// Leave-self-out score of training point i.
inline double lof_training(const std::vector<P>& pts, std::size_t i, std::size_t k) {
  return lof(pts, pts[i], k, i);
}

}  // namespace oracle
