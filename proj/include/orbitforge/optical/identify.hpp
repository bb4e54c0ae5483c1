#pragma once

#include <string>
#include <vector>

#include "orbitforge/cell/board.hpp"
#include "orbitforge/common/error.hpp"
#include "orbitforge/common/pnm.hpp"
#include "orbitforge/common/rect.hpp"

namespace orbitforge::optical {

struct ReferenceEntry {
  std::string board_type;
  GrayImage image;  // canonical (0 degree) overview
};

struct ReferenceLibrary {
  std::vector<ReferenceEntry> entries;

  const ReferenceEntry* find(const std::string& board_type) const;
};

struct Identification {
  std::string board_type;
  cell::Orientation orientation = cell::Orientation::Deg0;
  double score = 0.0;
};

/// Best match was below the threshold. Carries the best candidate anyway.
class LowConfidence : public Error {
 public:
  LowConfidence(double score, Identification best)
      : Error("board identification below threshold (score " + std::to_string(score) + ")"),
        score_(score),
        best_(std::move(best)) {}

  double score() const noexcept { return score_; }
  const Identification& best() const noexcept { return best_; }

 private:
  double score_;
  Identification best_;
};

/// Zero-mean normalized cross-correlation over equally sized images. Sums
/// are exact integers, so the score does not depend on pixel order. A
/// zero-variance image scores 0.
double ncc(const GrayImage& a, const GrayImage& b);

/// Same, restricted to a pixel rectangle. Two constant regions score 1 when
/// equal and 0 otherwise.
double ncc_region(const GrayImage& a, const GrayImage& b, std::size_t x0, std::size_t y0,
                  std::size_t x1, std::size_t y1);

/// Tries every reference under every quarter turn; the input is assumed to be
/// the reference rotated counter-clockwise by the reported orientation. Ties
/// keep the earlier library entry and the smaller rotation. Throws
/// LowConfidence below `match_threshold`, and ValidationError for an empty
/// library or mismatched image sizes.
Identification identify_board(const GrayImage& image, const ReferenceLibrary& library,
                              double match_threshold = 0.8);

/// Stage-1 similarity residuals: 1 - NCC per inspected region between the
/// de-rotated input and the reference. Regions are a tile grid plus any extra
/// pixel rectangles (layout items).
struct ResidualReport {
  double max_residual = 0.0;
  std::vector<Rect> flagged;  // pixel rects whose residual exceeds the threshold
};

ResidualReport stage1_residuals(const GrayImage& aligned, const GrayImage& reference,
                                std::size_t tile_px, const std::vector<Rect>& regions,
                                double threshold);

}  // namespace orbitforge::optical
