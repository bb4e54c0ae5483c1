#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <vector>

#include "orbitforge/cell/cell_config.hpp"
#include "orbitforge/common/rng.hpp"
#include "orbitforge/optical/identify.hpp"
#include "orbitforge/optical/image.hpp"

namespace orbitforge::optical {

/// Board millimetres to image pixels: uniform scale, board centred.
struct BoardFrame {
  double scale_px_per_mm = 1.0;
  double offset_x_px = 0.0;
  double offset_y_px = 0.0;

  Rect to_px(const Rect& mm) const {
    return {offset_x_px + scale_px_per_mm * mm.x, offset_y_px + scale_px_per_mm * mm.y,
            scale_px_per_mm * mm.width, scale_px_per_mm * mm.height};
  }
};

BoardFrame fit_frame(const cell::BoardType& type, std::size_t width_px, std::size_t height_px,
                     double fill = 0.9);

inline constexpr std::size_t kOverviewSize = 256;

/// Noise-free overview photograph of a board in its canonical orientation.
/// Surface defects are drawn into it so stage 1 can notice them.
GrayImage render_overview(const cell::BoardType& type, std::span<const cell::FaultSpec> faults = {});

/// What the camera sees for a board lying at `o` in its tray.
GrayImage observe_overview(const cell::BoardType& type, cell::Orientation o,
                           std::span<const cell::FaultSpec> faults = {});

/// Loads reference_image_path (relative to `base_dir`) when set, otherwise
/// renders the clean overview.
ReferenceLibrary build_reference_library(const cell::CellConfig& cell,
                                         const std::filesystem::path& base_dir = {});

/// Layout rectangles in overview pixels, used as stage-1 regions.
std::vector<Rect> overview_regions(const cell::BoardType& type);

struct ProbabilityMap {
  std::array<FloatGrid, cell::kSurfaceClassCount> classes;
  BoardFrame frame;

  FloatGrid& of(cell::SurfaceClass c) { return classes[static_cast<std::size_t>(c)]; }
  const FloatGrid& of(cell::SurfaceClass c) const { return classes[static_cast<std::size_t>(c)]; }
};

struct OracleParams {
  double amplitude = 0.95;
  double blur_sigma_px = 1.0;
  double noise_sd = 0.05;
};

struct GroundTruth {
  cell::SurfaceClass surface_class = cell::SurfaceClass::Solderball;
  Rect bbox_px;
};

struct OracleOutput {
  ProbabilityMap maps;
  std::vector<GroundTruth> defects;
};

/// Stands in for the segmentation network: rasterizes the layout and the
/// injected surface faults per class at 640x480, blurs, adds noise, clamps.
OracleOutput generate_probability_maps(const cell::BoardType& type,
                                       std::span<const cell::FaultSpec> faults,
                                       const OracleParams& params, Rng& rng);

/// Visible pin centres in the casing frame (pin (r, c) nominally at
/// (c * pitch, r * pitch)). Missing pins are omitted, bent pins shifted.
std::vector<Vec2> observe_pins(const cell::ConnectorPins& pins,
                               std::span<const cell::FaultSpec> faults, double noise_sd_mm,
                               Rng& rng);

}  // namespace orbitforge::optical
