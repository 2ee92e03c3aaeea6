#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stormcast/features.hpp"
#include "stormcast/raster.hpp"

namespace stormcast {

/// Binary lightning mask on the tile grid.
struct LabelFrame {
  GridGeometry geometry;
  Timestamp window_start{}; // the labelled 15 minute window
  std::vector<std::uint8_t> labels;

  std::uint8_t at(int x, int y) const noexcept {
    return labels[static_cast<std::size_t>(y) * geometry.width + x];
  }
};

using RasterSeries = std::map<Timestamp, LightningRaster>;

inline constexpr Minutes kMaxOffset{300};

/// Throws InvalidOffset unless offset is a multiple of 15 min in [0, 5 h].
void validate_offset(Minutes offset);

/// label(x, y) = 1 iff the raster for [t0 + offset, t0 + offset + 15 min) has
/// at least one strike at (x, y). Throws MissingRaster, InvalidOffset.
LabelFrame label_tiles(const RasterSeries &rasters, Timestamp t0, Minutes offset);
LabelFrame label_tiles(const LightningRaster &raster);

struct BalancedSelection {
  std::vector<TileIndex> tiles; // positives first (row-major), then sampled negatives
  std::size_t positives = 0;
  std::size_t negatives = 0;
  bool degenerate = false; // more positives than negatives; all tiles kept
};

/// All positive tiles plus an equal number of negatives drawn uniformly
/// without replacement from the same frame.
BalancedSelection balance_per_image(const LabelFrame &labels, std::uint64_t seed);

/// Seed for the frame at `frame_index` within a run.
constexpr std::uint64_t frame_seed(std::uint64_t run_seed, std::uint64_t frame_index) noexcept {
  return run_seed ^ frame_index;
}

struct Fold {
  Timestamp start{};
  Timestamp end{}; // inclusive: timestamp of the last frame in the fold
};

struct FoldSpec {
  std::vector<Fold> folds;
  Minutes margin{720};
  std::uint64_t seed = 0;

  /// Fold containing t, or nullopt for timestamps in a margin gap.
  std::optional<std::size_t> fold_of(Timestamp t) const noexcept;
  /// Throws InsufficientData if folds overlap or a gap is below the margin.
  void validate() const;
};

nlohmann::json to_json(const FoldSpec &spec);
FoldSpec fold_spec_from_json(const nlohmann::json &j);

/// Splits the sorted distinct timestamps into k contiguous blocks of
/// near-equal size and discards frames around each boundary so consecutive
/// folds are separated by at least `margin`. Throws InsufficientData.
FoldSpec make_folds(std::span<const Timestamp> available, std::size_t k = 4,
                    Minutes margin = Minutes{720}, std::uint64_t seed = 0);

/// Features plus binary labels and per-row fold ids.
struct LabeledDataset {
  FeatureMatrix features;
  std::vector<std::uint8_t> labels;
  std::vector<std::int32_t> folds;

  std::size_t rows() const noexcept { return labels.size(); }
  /// Row indices with fold == f (test) or != f (train).
  std::vector<std::size_t> rows_in_fold(std::int32_t fold) const;
  std::vector<std::size_t> rows_outside_fold(std::int32_t fold) const;
  void validate() const;
};

} // namespace stormcast
