#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "orbitforge/common/error.hpp"

namespace orbitforge::electrical {

class InsufficientData : public Error {
 public:
  using Error::Error;
};

/// Every training point coincides, leaving no density to compare against.
class DegenerateData : public Error {
 public:
  using Error::Error;
};

class OverCleaned : public Error {
 public:
  using Error::Error;
};

using Feature = std::array<double, 2>;

/// Local Outlier Factor over a fixed training set. k-neighbourhoods include
/// every point tied at the k-distance.
class LofModel {
 public:
  std::size_t k() const { return k_; }
  std::size_t size() const { return points_.size(); }
  std::span<const Feature> points() const { return points_; }
  double k_distance(std::size_t i) const { return kdist_[i]; }
  double lrd(std::size_t i) const { return lrd_[i]; }
  /// LOF of training point i against the rest of the training set.
  double training_score(std::size_t i) const { return train_lof_[i]; }
  /// k-distances and reachability distances are floored here, so groups of
  /// more than k identical readings keep a finite density.
  double distance_floor() const { return floor_; }

  double threshold = 1.5;

 private:
  friend LofModel lof_fit(std::span<const Feature>, std::size_t);
  friend double lof_score(const LofModel&, const Feature&);

  std::size_t k_ = 0;
  std::vector<Feature> points_;
  std::vector<double> kdist_;
  std::vector<double> lrd_;
  std::vector<double> train_lof_;
  double floor_ = 0.0;
};

double distance(const Feature& a, const Feature& b);

/// Throws InsufficientData unless |points| > k >= 1.
LofModel lof_fit(std::span<const Feature> points, std::size_t k);

/// Novelty score of a query against the fitted training set.
double lof_score(const LofModel& model, const Feature& query);

/// Repeatedly drops training points whose LOF exceeds `cutoff` and refits
/// until nothing changes, so the result is a fixpoint. Throws OverCleaned when
/// fewer than k + 1 points would remain.
std::vector<Feature> clean_training(std::span<const Feature> points, std::size_t k, double cutoff);

}  // namespace orbitforge::electrical
