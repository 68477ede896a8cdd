#pragma once

#include <xrdseg/common.hpp>

#include <cstdlib>
#include <string>
#include <utility>
#include <vector>

namespace xrdseg {

// Deterministic mapping between an image and its overlapping square tiles.
// Origins step by `step` and the final origin on each axis is clamped so the
// last window ends exactly at the image edge.
struct TileGrid {
  Index height = 0, width = 0;
  Index window = 0, step = 0;
  std::vector<Index> row_origins;
  std::vector<Index> col_origins;

  Index tile_count() const {
    return static_cast<Index>(row_origins.size() * col_origins.size());
  }
  // Tiles enumerate row-major over (row origin, col origin).
  std::pair<Index, Index> origin(Index tile) const {
    const Index ncols = static_cast<Index>(col_origins.size());
    return {row_origins[tile / ncols], col_origins[tile % ncols]};
  }
};

inline std::vector<Index> axis_origins(Index length, Index window, Index step) {
  std::vector<Index> origins;
  const Index last = length - window;
  for (Index k = 0;; ++k) {
    const Index o = k * step;
    if (o >= last) {
      if (origins.empty() || origins.back() != last) origins.push_back(last);
      break;
    }
    origins.push_back(o);
  }
  return origins;
}

inline TileGrid make_grid(Index height, Index width, Index window, Index step) {
  if (!is_power_of_two(window)) {
    throw ConfigError("make_grid: window " + std::to_string(window) +
                      " must be a power of two");
  }
  if (window > height || window > width) {
    throw ConfigError("make_grid: window " + std::to_string(window) +
                      " exceeds image " + std::to_string(height) + "x" +
                      std::to_string(width));
  }
  if (step < 1 || step > window) {
    throw ConfigError("make_grid: step " + std::to_string(step) +
                      " must be in [1, window]");
  }
  TileGrid g;
  g.height = height;
  g.width = width;
  g.window = window;
  g.step = step;
  g.row_origins = axis_origins(height, window, step);
  g.col_origins = axis_origins(width, window, step);
  return g;
}

// Copy-semantics crop; tile order matches the grid order.
template <typename A>
std::vector<A> crop_tiles(const A& image, const TileGrid& grid) {
  if (image.rows() != grid.height || image.cols() != grid.width) {
    throw DataError("crop_tiles: image " + std::to_string(image.rows()) + "x" +
                    std::to_string(image.cols()) + " does not match grid " +
                    std::to_string(grid.height) + "x" + std::to_string(grid.width));
  }
  std::vector<A> tiles;
  tiles.reserve(grid.tile_count());
  for (Index r : grid.row_origins) {
    for (Index c : grid.col_origins) {
      tiles.push_back(image.block(r, c, grid.window, grid.window));
    }
  }
  return tiles;
}

struct LabeledTile {
  ImageF pixels;
  MaskU8 labels;
  std::string source_id;
  Index origin_row = 0, origin_col = 0;
  double labeled_fraction = 0.0;
};

inline std::vector<LabeledTile> crop_labeled(const ImageF& image, const MaskU8& labels,
                                             const TileGrid& grid,
                                             const std::string& source_id) {
  if (labels.rows() != image.rows() || labels.cols() != image.cols()) {
    throw DataError("crop_labeled: labels " + std::to_string(labels.rows()) + "x" +
                    std::to_string(labels.cols()) + " do not match image " +
                    std::to_string(image.rows()) + "x" + std::to_string(image.cols()) +
                    " for " + source_id);
  }
  std::vector<LabeledTile> tiles;
  tiles.reserve(grid.tile_count());
  for (Index r : grid.row_origins) {
    for (Index c : grid.col_origins) {
      LabeledTile t;
      t.pixels = image.block(r, c, grid.window, grid.window);
      t.labels = labels.block(r, c, grid.window, grid.window);
      t.source_id = source_id;
      t.origin_row = r;
      t.origin_col = c;
      t.labeled_fraction = t.labels.template cast<double>().mean();
      tiles.push_back(std::move(t));
    }
  }
  return tiles;
}

namespace detail {

// Per-pixel owning tile index along one axis: nearest tile center in doubled
// integer coordinates, ties to the lower tile index. Border pixels fall to
// the first/last tile automatically.
inline std::vector<Index> axis_owner(const std::vector<Index>& origins, Index length,
                                     Index window) {
  std::vector<Index> owner(length);
  Index k = 0;
  for (Index p = 0; p < length; ++p) {
    const Index pc = 2 * p + 1;  // doubled pixel-center coordinate
    while (k + 1 < static_cast<Index>(origins.size())) {
      const Index cur = std::abs(pc - (2 * origins[k] + window));
      const Index nxt = std::abs(pc - (2 * origins[k + 1] + window));
      if (nxt < cur) {
        ++k;
      } else {
        break;
      }
    }
    owner[p] = k;
  }
  return owner;
}

}  // namespace detail

// Reassemble per-tile maps into a full image. Every output pixel is taken
// from exactly one tile (overlaps are dropped, not blended): the tile whose
// center is nearest along each axis.
template <typename A>
A stitch_tiles(const std::vector<A>& tiles, const TileGrid& grid) {
  if (static_cast<Index>(tiles.size()) != grid.tile_count()) {
    throw DataError("stitch_tiles: got " + std::to_string(tiles.size()) +
                    " tiles, grid has " + std::to_string(grid.tile_count()));
  }
  for (std::size_t i = 0; i < tiles.size(); ++i) {
    if (tiles[i].rows() != grid.window || tiles[i].cols() != grid.window) {
      throw DataError("stitch_tiles: tile " + std::to_string(i) +
                      " is not window-sized");
    }
  }
  const std::vector<Index> row_owner =
      detail::axis_owner(grid.row_origins, grid.height, grid.window);
  const std::vector<Index> col_owner =
      detail::axis_owner(grid.col_origins, grid.width, grid.window);
  const Index ncols = static_cast<Index>(grid.col_origins.size());
  A out(grid.height, grid.width);
  for (Index r = 0; r < grid.height; ++r) {
    const Index tr = row_owner[r];
    for (Index c = 0; c < grid.width; ++c) {
      const Index tc = col_owner[c];
      const A& tile = tiles[tr * ncols + tc];
      out(r, c) = tile(r - grid.row_origins[tr], c - grid.col_origins[tc]);
    }
  }
  return out;
}

enum class Augmentation { Identity, Rot90, Rot180, Rot270, FlipAxis0, FlipAxis1 };

inline constexpr Augmentation kAllAugmentations[] = {
    Augmentation::Identity,  Augmentation::Rot90,     Augmentation::Rot180,
    Augmentation::Rot270,    Augmentation::FlipAxis0, Augmentation::FlipAxis1,
};

inline const char* augmentation_name(Augmentation a) {
  switch (a) {
    case Augmentation::Identity: return "identity";
    case Augmentation::Rot90: return "rot90";
    case Augmentation::Rot180: return "rot180";
    case Augmentation::Rot270: return "rot270";
    case Augmentation::FlipAxis0: return "flip0";
    case Augmentation::FlipAxis1: return "flip1";
  }
  return "?";
}

// Index maps; rotations use the counter-clockwise convention where source
// pixel (r, c) lands at (c, H-1-r).
template <typename A>
A apply_augmentation(const A& in, Augmentation aug) {
  const Index h = in.rows(), w = in.cols();
  if (aug != Augmentation::FlipAxis0 && aug != Augmentation::FlipAxis1 &&
      aug != Augmentation::Identity && h != w) {
    throw DataError("apply_augmentation: rotations require a square image, got " +
                    std::to_string(h) + "x" + std::to_string(w));
  }
  A out(h, w);
  switch (aug) {
    case Augmentation::Identity:
      out = in;
      break;
    case Augmentation::Rot90:
      for (Index r = 0; r < h; ++r)
        for (Index c = 0; c < w; ++c) out(c, h - 1 - r) = in(r, c);
      break;
    case Augmentation::Rot180:
      for (Index r = 0; r < h; ++r)
        for (Index c = 0; c < w; ++c) out(h - 1 - r, w - 1 - c) = in(r, c);
      break;
    case Augmentation::Rot270:
      for (Index r = 0; r < h; ++r)
        for (Index c = 0; c < w; ++c) out(h - 1 - c, r) = in(r, c);
      break;
    case Augmentation::FlipAxis0:
      for (Index r = 0; r < h; ++r) out.row(h - 1 - r) = in.row(r);
      break;
    case Augmentation::FlipAxis1:
      for (Index c = 0; c < w; ++c) out.col(w - 1 - c) = in.col(c);
      break;
  }
  return out;
}

// The six training variants of an (image, labels) pair; labels transform
// with the pixels.
inline std::vector<std::pair<ImageF, MaskU8>> augment(const ImageF& image,
                                                      const MaskU8& labels) {
  if (image.rows() != image.cols()) {
    throw DataError("augment: image must be square, got " +
                    std::to_string(image.rows()) + "x" + std::to_string(image.cols()));
  }
  if (labels.rows() != image.rows() || labels.cols() != image.cols()) {
    throw DataError("augment: labels do not match image shape");
  }
  std::vector<std::pair<ImageF, MaskU8>> out;
  out.reserve(6);
  for (Augmentation a : kAllAugmentations) {
    out.emplace_back(apply_augmentation(image, a), apply_augmentation(labels, a));
  }
  return out;
}

}  // namespace xrdseg
