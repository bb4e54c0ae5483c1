#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "orbitforge/common/pnm.hpp"
#include "orbitforge/common/rng.hpp"
#include "orbitforge/common/vec.hpp"
#include "orbitforge/insertion/insertion.hpp"

namespace orbitforge::qpolicy {

struct Hyperparams {
  double epsilon = 0.1;
  double alpha = 0.3;
  double q_init = 1.0;  // optimistic: equal to the success bonus
  double success_bonus = 1.0;
  double force_weight = 1.0;

  void validate() const;
};

/// Raster position; (0, 0) is the most negative shift on both axes.
struct CellIndex {
  int ix = 0;
  int iy = 0;

  friend auto operator<=>(const CellIndex&, const CellIndex&) = default;
};

struct CellStats {
  double value = 0.0;
  std::uint64_t visits = 0;
};

/// Square raster of X/Y insertion shifts centred on the nominal point, one
/// learned value per shift.
class QTable {
 public:
  QTable() = default;
  /// `side` must be odd and the extent (side/2 * step) below 1 mm.
  QTable(std::string board_type, int side = 5, double step_mm = 0.25, Hyperparams h = {});

  const std::string& board_type() const { return board_type_; }
  int side() const { return side_; }
  double step_mm() const { return step_mm_; }
  double extent_mm() const { return step_mm_ * (side_ / 2); }
  std::size_t size() const { return cells_.size(); }
  const Hyperparams& hyperparams() const { return hyper_; }
  Hyperparams& hyperparams() { return hyper_; }

  bool contains(CellIndex c) const { return c.ix >= 0 && c.iy >= 0 && c.ix < side_ && c.iy < side_; }
  CellIndex cell(std::size_t flat) const;
  std::size_t flat(CellIndex c) const;
  /// Shift in mm applied to the nominal insertion point.
  Vec2 shift_mm(CellIndex c) const;
  /// Squared radial distance in raster units (exact, for tie-breaks).
  int radial2(CellIndex c) const;

  const CellStats& stats(CellIndex c) const { return cells_.at(flat(c)); }
  CellStats& stats(CellIndex c) { return cells_.at(flat(c)); }

  /// Highest value; ties to the smallest radius, then smallest (ix, iy).
  CellIndex greedy() const;

  friend bool operator==(const QTable& a, const QTable& b);

 private:
  std::string board_type_;
  int side_ = 0;
  double step_mm_ = 0.0;
  Hyperparams hyper_;
  std::vector<CellStats> cells_;  // row-major over iy, then ix
};

/// Epsilon-greedy. Always consumes one uniform; a second draw picks the
/// exploratory cell.
CellIndex select_shift(const QTable& table, Rng& rng);

/// success_bonus * [outcome succeeded] - force_weight * peak / collision threshold.
double compute_reward(const insertion::ForceTrace& trace, const insertion::ContactOutcome& outcome,
                      const Hyperparams& h, const insertion::InsertionParams& params);

/// value <- (1 - alpha) value + alpha reward; visits + 1. Throws
/// ValidationError for a cell outside the raster.
void update_value(QTable& table, CellIndex cell, double reward);

nlohmann::json to_json(const QTable& table);
QTable qtable_from_json(const nlohmann::json& j);

/// Affine map of values onto [0, 1]; a constant table maps to 1.
std::vector<double> heatmap_intensity(const QTable& table);
nlohmann::json heatmap_message(const QTable& table);
/// Red (low) to green (high), `scale` pixels per cell.
RgbImage render_heatmap(const QTable& table, std::size_t scale = 16);

}  // namespace orbitforge::qpolicy
