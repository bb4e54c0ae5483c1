#include "orbitforge/qpolicy/qtable.hpp"

#include <algorithm>
#include <cmath>

namespace orbitforge::qpolicy {

void Hyperparams::validate() const {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ValidationError("qpolicy.epsilon", "must be in [0, 1]");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ValidationError("qpolicy.alpha", "must be in (0, 1]");
  if (!(force_weight > 0.0)) throw ValidationError("qpolicy.force_weight", "must be positive");
  if (!(success_bonus > 0.0)) throw ValidationError("qpolicy.success_bonus", "must be positive");
}

QTable::QTable(std::string board_type, int side, double step_mm, Hyperparams h)
    : board_type_(std::move(board_type)), side_(side), step_mm_(step_mm), hyper_(h) {
  if (side < 1 || side % 2 == 0) throw ValidationError("qpolicy.side", "must be a positive odd count");
  if (!(step_mm > 0.0)) throw ValidationError("qpolicy.step_mm", "must be positive");
  if (!(extent_mm() < 1.0)) throw ValidationError("qpolicy.step_mm", "raster extent must stay below 1 mm");
  hyper_.validate();
  cells_.assign(static_cast<std::size_t>(side * side), CellStats{hyper_.q_init, 0});
}

CellIndex QTable::cell(std::size_t flat) const {
  return {static_cast<int>(flat % static_cast<std::size_t>(side_)),
          static_cast<int>(flat / static_cast<std::size_t>(side_))};
}

std::size_t QTable::flat(CellIndex c) const {
  if (!contains(c))
    throw ValidationError("cell", "(" + std::to_string(c.ix) + ", " + std::to_string(c.iy) +
                                      ") outside the raster");
  return static_cast<std::size_t>(c.iy * side_ + c.ix);
}

Vec2 QTable::shift_mm(CellIndex c) const {
  const int half = side_ / 2;
  return {step_mm_ * (c.ix - half), step_mm_ * (c.iy - half)};
}

int QTable::radial2(CellIndex c) const {
  const int half = side_ / 2;
  return (c.ix - half) * (c.ix - half) + (c.iy - half) * (c.iy - half);
}

CellIndex QTable::greedy() const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < cells_.size(); ++i) {
    const double v = cells_[i].value, bv = cells_[best].value;
    if (v > bv) {
      best = i;
    } else if (v == bv) {
      const CellIndex a = cell(i), b = cell(best);
      const int ra = radial2(a), rb = radial2(b);
      if (ra < rb || (ra == rb && a < b)) best = i;
    }
  }
  return cell(best);
}

bool operator==(const QTable& a, const QTable& b) {
  if (a.board_type_ != b.board_type_ || a.side_ != b.side_ || a.step_mm_ != b.step_mm_) return false;
  const Hyperparams &x = a.hyper_, &y = b.hyper_;
  if (x.epsilon != y.epsilon || x.alpha != y.alpha || x.q_init != y.q_init ||
      x.success_bonus != y.success_bonus || x.force_weight != y.force_weight)
    return false;
  for (std::size_t i = 0; i < a.cells_.size(); ++i)
    if (a.cells_[i].value != b.cells_[i].value || a.cells_[i].visits != b.cells_[i].visits)
      return false;
  return a.cells_.size() == b.cells_.size();
}

CellIndex select_shift(const QTable& table, Rng& rng) {
  if (table.size() == 0) throw ValidationError("qtable", "empty raster");
  const bool explore = rng.uniform() < table.hyperparams().epsilon;
  if (explore) return table.cell(rng.index(table.size()));
  return table.greedy();
}

double compute_reward(const insertion::ForceTrace& trace, const insertion::ContactOutcome& outcome,
                      const Hyperparams& h, const insertion::InsertionParams& params) {
  const double bonus = outcome.success() ? h.success_bonus : 0.0;
  return bonus - h.force_weight * trace.peak_force_n() / params.collision_threshold_n;
}

void update_value(QTable& table, CellIndex cell, double reward) {
  CellStats& s = table.stats(cell);
  const double a = table.hyperparams().alpha;
  s.value = (1.0 - a) * s.value + a * reward;
  ++s.visits;
}

nlohmann::json to_json(const QTable& t) {
  nlohmann::json values = nlohmann::json::array(), visits = nlohmann::json::array();
  for (std::size_t i = 0; i < t.size(); ++i) {
    values.push_back(t.stats(t.cell(i)).value);
    visits.push_back(t.stats(t.cell(i)).visits);
  }
  const Hyperparams& h = t.hyperparams();
  return {{"board_type", t.board_type()},
          {"side", t.side()},
          {"step_mm", t.step_mm()},
          {"hyperparams",
           {{"epsilon", h.epsilon},
            {"alpha", h.alpha},
            {"q_init", h.q_init},
            {"success_bonus", h.success_bonus},
            {"force_weight", h.force_weight}}},
          {"values", std::move(values)},
          {"visits", std::move(visits)}};
}

QTable qtable_from_json(const nlohmann::json& j) {
  try {
    const auto& hj = j.at("hyperparams");
    Hyperparams h{hj.at("epsilon").get<double>(), hj.at("alpha").get<double>(),
                  hj.at("q_init").get<double>(), hj.at("success_bonus").get<double>(),
                  hj.at("force_weight").get<double>()};
    QTable t(j.at("board_type").get<std::string>(), j.at("side").get<int>(),
             j.at("step_mm").get<double>(), h);
    const auto& values = j.at("values");
    const auto& visits = j.at("visits");
    if (values.size() != t.size() || visits.size() != t.size())
      throw ParseError("qtable: value/visit arrays do not match the raster");
    for (std::size_t i = 0; i < t.size(); ++i) {
      t.stats(t.cell(i)).value = values[i].get<double>();
      t.stats(t.cell(i)).visits = visits[i].get<std::uint64_t>();
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("qtable: ") + e.what());
  }
}

std::vector<double> heatmap_intensity(const QTable& t) {
  double lo = t.stats(t.cell(0)).value, hi = lo;
  for (std::size_t i = 0; i < t.size(); ++i) {
    lo = std::min(lo, t.stats(t.cell(i)).value);
    hi = std::max(hi, t.stats(t.cell(i)).value);
  }
  std::vector<double> out(t.size(), 1.0);
  if (hi > lo)
    for (std::size_t i = 0; i < t.size(); ++i) out[i] = (t.stats(t.cell(i)).value - lo) / (hi - lo);
  return out;
}

nlohmann::json heatmap_message(const QTable& t) {
  nlohmann::json j = to_json(t);
  j["intensity"] = heatmap_intensity(t);
  const CellIndex g = t.greedy();
  j["greedy"] = {g.ix, g.iy};
  return j;
}

RgbImage render_heatmap(const QTable& t, std::size_t scale) {
  const auto intensity = heatmap_intensity(t);
  RgbImage img;
  img.width = img.height = static_cast<std::size_t>(t.side()) * scale;
  img.pixels.resize(img.width * img.height * 3);
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      // Raster y grows upwards in the cell frame; image rows grow downwards.
      const CellIndex c{static_cast<int>(x / scale), t.side() - 1 - static_cast<int>(y / scale)};
      const double v = intensity[t.flat(c)];
      std::uint8_t* px = &img.pixels[(y * img.width + x) * 3];
      px[0] = static_cast<std::uint8_t>(std::lround(255.0 * (1.0 - v)));
      px[1] = static_cast<std::uint8_t>(std::lround(255.0 * v));
      px[2] = 0;
    }
  }
  return img;
}

}  // namespace orbitforge::qpolicy
