#pragma once

#include <cstddef>

#include "orbitforge/insertion/insertion.hpp"
#include "orbitforge/qpolicy/qtable.hpp"

namespace orbitforge::qpolicy {

/// Everything an episode needs besides the table and the random stream.
struct InsertionScenario {
  insertion::MisalignmentModel misalignment;
  insertion::Geometry geometry;
  insertion::InsertionParams params;
  insertion::ContactModel contact;
};

struct EpisodeResult {
  CellIndex cell;
  insertion::ForceTrace trace;
  insertion::ContactOutcome outcome;
  double reward = 0.0;
};

/// select -> descend -> classify -> reward -> update.
EpisodeResult run_episode(QTable& table, const InsertionScenario& s, Rng& rng);

struct TrainingStats {
  std::size_t episodes = 0;
  std::size_t successes = 0;
};

TrainingStats train(QTable& table, const InsertionScenario& s, std::size_t episodes, Rng& rng);

/// Inserts `trials` times at the greedy shift without learning; returns the
/// number of successful insertions.
std::size_t evaluate_greedy(const QTable& table, const InsertionScenario& s, std::size_t trials,
                            Rng& rng);

}  // namespace orbitforge::qpolicy
