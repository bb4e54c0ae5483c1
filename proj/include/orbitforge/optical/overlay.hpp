#pragma once

#include <filesystem>
#include <vector>

#include "orbitforge/optical/contours.hpp"

namespace orbitforge::optical {

/// Grey base image with contours (class colour) and boxes drawn on top,
/// written as 8-bit RGB PNG. Throws Error on I/O failure.
void write_overlay_png(const std::filesystem::path& path, const GrayImage& base,
                       const std::vector<Detection>& detections);

/// Decodes an 8-bit RGB PNG (used to check overlays).
RgbImage read_png_rgb(const std::filesystem::path& path);

}  // namespace orbitforge::optical
