#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stormcast/raster.hpp"

namespace stormcast {

// ---------------------------------------------------------------------------
// Sliding-window filters
// ---------------------------------------------------------------------------

enum class KernelKind : std::uint8_t { Identity, Max, Min, Avg, Gauss };

std::string_view kernel_kind_name(KernelKind kind) noexcept; // id, max, min, avg, gauss

struct KernelSpec {
  KernelKind kind = KernelKind::Identity;
  int size = 1;
  double sigma = 0.0; // gaussian only

  /// Gaussian window spanning +-3 sigma.
  static KernelSpec gaussian(int size) { return {KernelKind::Gauss, size, size / 6.0}; }

  /// Throws BadKernel.
  void validate() const;
  friend bool operator==(const KernelSpec &, const KernelSpec &) = default;
};

/// Normalised 2-D gaussian weights, row-major size x size, summing to 1.
std::vector<double> gaussian_kernel(int size, double sigma);

/// Windowed max / min / mean / gaussian-weighted mean with reflect padding
/// (`d c b a | a b c d | d c b a`). Size 1 is the identity for every kind.
GridFrame conv_filter(const GridFrame &frame, const KernelSpec &spec);

/// Maps an out-of-range index into [0, n) by half-sample reflection.
constexpr int reflect_index(int i, int n) noexcept {
  if (n == 1) {
    return 0;
  }
  const int period = 2 * n;
  i %= period;
  if (i < 0) {
    i += period;
  }
  return i < n ? i : period - 1 - i;
}

// ---------------------------------------------------------------------------
// Schemas
// ---------------------------------------------------------------------------

enum class SchemaVariant : std::uint8_t { ErrorOnly153, Extended129 };

std::string_view variant_name(SchemaVariant v) noexcept; // error153 / ext129
std::optional<SchemaVariant> parse_variant(std::string_view name) noexcept;

enum class FeatureSource : std::uint8_t { Error, Raw };

/// One column. Scalar columns (time, coordinates) have no source/channel.
struct FeatureColumn {
  enum class Kind : std::uint8_t { Convolution, TimeHhmm, CoordX, CoordY };
  Kind kind = Kind::Convolution;
  FeatureSource source = FeatureSource::Error;
  Channel channel = Channel::VIS06;
  KernelSpec kernel;
};

struct FeatureSchema {
  std::optional<SchemaVariant> variant; // empty for ad-hoc schemas loaded from disk
  std::vector<std::string> names;

  std::size_t size() const noexcept { return names.size(); }
  /// FNV-1a over the ordered names.
  std::string fingerprint() const;
  friend bool operator==(const FeatureSchema &, const FeatureSchema &) = default;
};

/// Feature names follow `<source>:<channel>:<kind><size>` plus the scalars
/// `time_hhmm`, `coord_x`, `coord_y`.
FeatureSchema build_schema(SchemaVariant variant);
std::vector<FeatureColumn> schema_columns(SchemaVariant variant);
std::string column_name(const FeatureColumn &column);

// ---------------------------------------------------------------------------
// Feature matrices
// ---------------------------------------------------------------------------

struct RowKey {
  std::int64_t timestamp = 0; // unix seconds of the error frame
  std::int32_t x = 0;
  std::int32_t y = 0;
  friend bool operator==(const RowKey &, const RowKey &) = default;
};

struct FeatureMatrix {
  FeatureSchema schema;
  std::vector<float> values; // rows x schema.size(), row-major
  std::vector<RowKey> keys;

  std::size_t rows() const noexcept { return keys.size(); }
  std::size_t cols() const noexcept { return schema.size(); }
  std::span<const float> row(std::size_t r) const noexcept {
    return {values.data() + r * cols(), cols()};
  }
  /// Throws SchemaMismatch when the payload does not match rows x cols.
  void validate() const;
  /// Appends the rows of `other` (same schema).
  void append(const FeatureMatrix &other);
  /// Rows in `indices`, in that order.
  FeatureMatrix subset(std::span<const std::size_t> indices) const;
};

/// Builds one row per requested tile. `error_frames` and `raw_frames` are in
/// canonical channel order; raw frames are required iff the schema needs them.
/// Convolutions run once per frame and are sampled at the tiles.
FeatureMatrix assemble(std::span<const GridFrame> error_frames,
                       std::span<const GridFrame> raw_frames, SchemaVariant variant,
                       std::span<const TileIndex> tiles);

struct NormalizationStats {
  std::vector<float> min;
  std::vector<float> max;
};

NormalizationStats compute_stats(const FeatureMatrix &training);

/// (v - min) / (max - min) clamped to [0, 1]; constant features map to 0.
FeatureMatrix normalize(const FeatureMatrix &matrix, const NormalizationStats &stats);

} // namespace stormcast
