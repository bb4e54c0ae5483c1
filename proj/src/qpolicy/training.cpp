#include "orbitforge/qpolicy/training.hpp"

namespace orbitforge::qpolicy {

EpisodeResult run_episode(QTable& table, const InsertionScenario& s, Rng& rng) {
  EpisodeResult r;
  r.cell = select_shift(table, rng);
  r.trace = insertion::simulate_descent(table.shift_mm(r.cell), s.misalignment, s.geometry,
                                        s.params, rng, s.contact);
  r.outcome = insertion::classify_trace(r.trace, s.params);
  r.reward = compute_reward(r.trace, r.outcome, table.hyperparams(), s.params);
  update_value(table, r.cell, r.reward);
  return r;
}

TrainingStats train(QTable& table, const InsertionScenario& s, std::size_t episodes, Rng& rng) {
  TrainingStats stats;
  for (std::size_t i = 0; i < episodes; ++i) {
    const EpisodeResult r = run_episode(table, s, rng);
    ++stats.episodes;
    stats.successes += r.outcome.success() ? 1 : 0;
  }
  return stats;
}

std::size_t evaluate_greedy(const QTable& table, const InsertionScenario& s, std::size_t trials,
                            Rng& rng) {
  const Vec2 shift = table.shift_mm(table.greedy());
  std::size_t ok = 0;
  for (std::size_t i = 0; i < trials; ++i) {
    const auto trace =
        insertion::simulate_descent(shift, s.misalignment, s.geometry, s.params, rng, s.contact);
    ok += insertion::classify_trace(trace, s.params).success() ? 1 : 0;
  }
  return ok;
}

}  // namespace orbitforge::qpolicy
