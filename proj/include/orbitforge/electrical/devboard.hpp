#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "orbitforge/cell/board.hpp"
#include "orbitforge/cell/cell_config.hpp"
#include "orbitforge/common/error.hpp"
#include "orbitforge/common/rng.hpp"

namespace orbitforge::electrical {

/// The DEVBoard did not acknowledge a state command.
class NoResponse : public Error {
 public:
  using Error::Error;
};

/// Simulated DEVBoard with one subsystem board plugged in. Draws follow the
/// board's electrical profile; injected drift, connector and dead-board faults
/// alter the behaviour.
class DevBoardSim {
 public:
  DevBoardSim(cell::ElectricalProfile profile, std::vector<cell::FaultSpec> faults, Rng rng);

  const cell::ElectricalProfile& profile() const { return profile_; }
  std::vector<cell::SystemState> declared_states() const;

  /// Throws NoResponse while a connector fault is active or the board is
  /// dead; ValidationError for a state the profile does not declare.
  void set_state(cell::SystemState s);
  cell::SystemState state() const { return state_; }
  bool responsive() const;

  /// Instantaneous load current. Multi-level states cycle through their
  /// levels; the first draw after a switch is a transient halfway between
  /// the old and new level.
  double draw_current_a();

  /// Extraction and re-insertion. Connector faults marked as clearing on
  /// re-insertion are gone afterwards.
  void reinsert();

 private:
  double nominal_level() const;

  cell::ElectricalProfile profile_;
  std::vector<cell::FaultSpec> faults_;
  Rng rng_;
  cell::SystemState state_ = cell::SystemState::Deactivated;
  std::optional<double> transient_from_;
  std::size_t level_index_ = 0;
};

/// Bench supply behind an SCPI-like line protocol.
///
///   *IDN?              identification string
///   :SOUR:VOLT <v>     set voltage;  :SOUR:VOLT?  read setpoint
///   :OUTP ON|OFF       output enable; :OUTP?      1 or 0
///   :INIT              latch one voltage/current acquisition
///   :FETC:VOLT? | :FETC:CURR? | :FETC:POWE?       latched values
///   :MEAS:VOLT? | :MEAS:CURR? | :MEAS:POWE?       acquire then fetch
///
/// Errors come back as `ERR <code>,"<text>"`, never as exceptions.
class PsuSim {
 public:
  struct Params {
    double voltage_noise_frac = 5e-4;
  };

  PsuSim(DevBoardSim& load, Rng rng) : PsuSim(load, rng, Params{}) {}
  PsuSim(DevBoardSim& load, Rng rng, Params params);

  std::string command(std::string_view line);

 private:
  void acquire();

  DevBoardSim* load_;
  Rng rng_;
  Params params_;
  double setpoint_v_ = 0.0;
  bool output_ = false;
  double volt_ = 0.0;
  double curr_ = 0.0;
};

/// Formats a value the way the PSU reports it.
std::string format_scpi_number(double v);

}  // namespace orbitforge::electrical
