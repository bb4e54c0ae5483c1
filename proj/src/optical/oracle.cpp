#include "orbitforge/optical/oracle.hpp"

#include <algorithm>
#include <cmath>

namespace orbitforge::optical {

namespace {

using cell::FaultKind;
using cell::SurfaceClass;

std::optional<SurfaceClass> defect_class(FaultKind k) {
  switch (k) {
    case FaultKind::Solderball: return SurfaceClass::Solderball;
    case FaultKind::Solderbridge: return SurfaceClass::Solderbridge;
    case FaultKind::Tombstone: return SurfaceClass::Tombstone;
    default: return std::nullopt;
  }
}

template <class T>
Rect fill_rect(Grid<T>& g, const Rect& px, T value) {
  const auto xs = pixel_span(px.x, px.right(), g.width);
  const auto ys = pixel_span(px.y, px.bottom(), g.height);
  for (std::size_t y = ys.begin; y < ys.end; ++y)
    for (std::size_t x = xs.begin; x < xs.end; ++x) g.at(x, y) = value;
  return {static_cast<double>(xs.begin), static_cast<double>(ys.begin),
          static_cast<double>(xs.end - xs.begin), static_cast<double>(ys.end - ys.begin)};
}

constexpr std::uint8_t kTray = 20, kBoard = 70, kPad = 150, kComponent = 200;

std::uint8_t defect_shade(SurfaceClass c) {
  switch (c) {
    case SurfaceClass::Solderball: return 255;
    case SurfaceClass::Solderbridge: return 235;
    default: return 110;  // tombstone: dark side of a standing part
  }
}

}  // namespace

BoardFrame fit_frame(const cell::BoardType& t, std::size_t w, std::size_t h, double fill) {
  const double s = std::min(fill * static_cast<double>(w) / t.width_mm,
                            fill * static_cast<double>(h) / t.height_mm);
  return {s, 0.5 * (static_cast<double>(w) - s * t.width_mm),
          0.5 * (static_cast<double>(h) - s * t.height_mm)};
}

GrayImage render_overview(const cell::BoardType& t, std::span<const cell::FaultSpec> faults) {
  Grid<std::uint8_t> g(kOverviewSize, kOverviewSize, kTray);
  const BoardFrame f = fit_frame(t, kOverviewSize, kOverviewSize);
  fill_rect(g, f.to_px({0, 0, t.width_mm, t.height_mm}), kBoard);
  for (const auto& item : t.component_layout)
    if (item.surface_class == SurfaceClass::Solderpad) fill_rect(g, f.to_px(item.rect_mm), kPad);
  for (const auto& item : t.component_layout)
    if (item.surface_class == SurfaceClass::Component) fill_rect(g, f.to_px(item.rect_mm), kComponent);
  for (const auto& fault : faults)
    if (const auto c = defect_class(fault.kind)) fill_rect(g, f.to_px(fault.region_mm), defect_shade(*c));
  return {g.width, g.height, std::move(g.data)};
}

GrayImage observe_overview(const cell::BoardType& t, cell::Orientation o,
                           std::span<const cell::FaultSpec> faults) {
  return rotate_quarter(render_overview(t, faults), cell::quarter_turns(o));
}

ReferenceLibrary build_reference_library(const cell::CellConfig& cell,
                                         const std::filesystem::path& base_dir) {
  ReferenceLibrary lib;
  for (const auto& t : cell.board_types) {
    GrayImage img = t.reference_image_path.empty()
                        ? render_overview(t)
                        : read_pgm(base_dir / t.reference_image_path);
    if (img.width != img.height)
      throw ValidationError("board_types." + t.id + ".reference_image_path",
                            "reference overview must be square");
    lib.entries.push_back({t.id, std::move(img)});
  }
  return lib;
}

std::vector<Rect> overview_regions(const cell::BoardType& t) {
  const BoardFrame f = fit_frame(t, kOverviewSize, kOverviewSize);
  std::vector<Rect> out;
  const double pad = 2.0;  // mm, so every region straddles an edge
  for (const auto& item : t.component_layout) {
    const Rect r = item.rect_mm;
    out.push_back(f.to_px({r.x - pad, r.y - pad, r.width + 2 * pad, r.height + 2 * pad}));
  }
  return out;
}

OracleOutput generate_probability_maps(const cell::BoardType& t,
                                       std::span<const cell::FaultSpec> faults,
                                       const OracleParams& p, Rng& rng) {
  OracleOutput out;
  out.maps.frame = fit_frame(t, kMapWidth, kMapHeight);
  for (auto& g : out.maps.classes) g = FloatGrid(kMapWidth, kMapHeight, 0.0f);
  const float amp = static_cast<float>(p.amplitude);
  for (const auto& item : t.component_layout)
    fill_rect(out.maps.of(item.surface_class), out.maps.frame.to_px(item.rect_mm), amp);
  for (const auto& fault : faults) {
    const auto c = defect_class(fault.kind);
    if (!c) continue;
    const Rect bbox = fill_rect(out.maps.of(*c), out.maps.frame.to_px(fault.region_mm), amp);
    out.defects.push_back({*c, bbox});
  }
  for (auto& g : out.maps.classes) {
    g = gaussian_blur(g, p.blur_sigma_px);
    if (p.noise_sd > 0)
      for (float& v : g.data) v += static_cast<float>(rng.normal(0.0, p.noise_sd));
    for (float& v : g.data) v = std::clamp(v, 0.0f, 1.0f);
  }
  return out;
}

std::vector<Vec2> observe_pins(const cell::ConnectorPins& pins,
                               std::span<const cell::FaultSpec> faults, double noise_sd_mm,
                               Rng& rng) {
  std::vector<Vec2> out;
  for (int r = 0; r < pins.rows; ++r)
    for (int c = 0; c < pins.cols; ++c) {
      bool missing = false;
      Vec2 shift;
      for (const auto& f : faults)
        if (f.pin_row == r && f.pin_col == c) {
          if (f.kind == FaultKind::MissingPin) missing = true;
          if (f.kind == FaultKind::BentPin) shift = shift + f.pin_shift_mm;
        }
      if (missing) continue;
      const Vec2 nominal{c * pins.pitch_mm, r * pins.pitch_mm};
      out.push_back(nominal + shift +
                    Vec2{rng.normal(0.0, noise_sd_mm), rng.normal(0.0, noise_sd_mm)});
    }
  return out;
}

}  // namespace orbitforge::optical
