#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stormcast/error.hpp"

namespace stormcast {

// ---------------------------------------------------------------------------
// Time
// ---------------------------------------------------------------------------

/// UTC instant. Frames and lightning windows live on the 15 minute lattice.
using Timestamp = std::chrono::sys_seconds;
using Minutes = std::chrono::minutes;

inline constexpr Minutes kWindowLength{15};

/// Parses ISO-8601 UTC (`2017-06-01T13:17:02Z`, `...+02:00`, fractional
/// seconds allowed). Timestamps without an explicit zone are rejected.
std::optional<Timestamp> parse_timestamp(std::string_view text);

/// `YYYY-MM-DDTHH:MM:SSZ`
std::string format_timestamp(Timestamp t);

/// Start of the half-open 15 minute window [start, start + 15 min) holding t.
Timestamp window_index(Timestamp t) noexcept;

/// Hour * 100 + minute, e.g. 13:15 -> 1315.
int time_hhmm(Timestamp t) noexcept;

/// Parses `h:mm` (e.g. `5:00`, `0:45`) into minutes.
std::optional<Minutes> parse_offset(std::string_view text);
std::string format_offset(Minutes offset);

// ---------------------------------------------------------------------------
// Channels
// ---------------------------------------------------------------------------

enum class Channel : std::uint8_t {
  VIS06,
  VIS08,
  NIR16,
  IR39,
  WV62,
  WV73,
  IR87,
  IR97,
  IR108,
};

inline constexpr std::size_t kChannelCount = 9;

inline constexpr std::array<Channel, kChannelCount> kChannels = {
    Channel::VIS06, Channel::VIS08, Channel::NIR16, Channel::IR39, Channel::WV62,
    Channel::WV73,  Channel::IR87,  Channel::IR97,  Channel::IR108};

std::string_view channel_name(Channel c) noexcept;
std::optional<Channel> parse_channel(std::string_view name) noexcept;

/// The first three channels measure reflected sunlight.
constexpr bool is_reflective(Channel c) noexcept {
  return c == Channel::VIS06 || c == Channel::VIS08 || c == Channel::NIR16;
}

// ---------------------------------------------------------------------------
// Grid
// ---------------------------------------------------------------------------

struct TileIndex {
  int x = 0;
  int y = 0;
  friend bool operator==(const TileIndex &, const TileIndex &) = default;
  friend auto operator<=>(const TileIndex &, const TileIndex &) = default;
};

/// Uniform lat/lon tiling of a bounding box. Row 0 is the northern edge,
/// x increases eastward.
struct GridGeometry {
  int width = 0;
  int height = 0;
  double lat_min = 0.0;
  double lat_max = 0.0;
  double lon_min = 0.0;
  double lon_max = 0.0;

  std::size_t size() const noexcept {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
  bool valid() const noexcept;
  /// Throws InvalidGeometry.
  void validate() const;

  /// Geometry whose box is the tile index space itself; used when only the
  /// dimensions are known (e.g. a frame loaded without a run configuration).
  static GridGeometry index_space(int width, int height);

  friend bool operator==(const GridGeometry &, const GridGeometry &) = default;
};

/// Tile holding (lat, lon). Points on the east/south outer edge clamp into the
/// last column/row. Throws OutOfBounds outside the closed box.
TileIndex tile_of(const GridGeometry &geometry, double lat, double lon);

/// Geographic centre of a tile.
std::pair<double, double> tile_center(const GridGeometry &geometry, TileIndex tile);

// ---------------------------------------------------------------------------
// Frames and lightning
// ---------------------------------------------------------------------------

/// One channel's raster at one timestamp, row-major (height x width).
struct GridFrame {
  GridGeometry geometry;
  std::string tag; // channel name or synthetic tag, at most 16 bytes
  Timestamp timestamp{};
  std::vector<float> values;

  GridFrame() = default;
  GridFrame(GridGeometry g, std::string t, Timestamp ts);
  GridFrame(GridGeometry g, std::string t, Timestamp ts, std::vector<float> v);

  int width() const noexcept { return geometry.width; }
  int height() const noexcept { return geometry.height; }

  float &at(int x, int y) noexcept {
    return values[static_cast<std::size_t>(y) * geometry.width + x];
  }
  float at(int x, int y) const noexcept {
    return values[static_cast<std::size_t>(y) * geometry.width + x];
  }

  /// Throws InvalidGeometry on size mismatch or InvalidArgument on
  /// non-finite values.
  void validate() const;
};

struct LightningRecord {
  Timestamp time{}; // truncated to the minute
  double lat = 0.0;
  double lon = 0.0;
  double charge_ka = 0.0;
  double height_km = 0.0;
};

struct LightningRaster {
  GridGeometry geometry;
  Timestamp window_start{};
  std::vector<std::int32_t> counts;

  std::int32_t at(int x, int y) const noexcept {
    return counts[static_cast<std::size_t>(y) * geometry.width + x];
  }
  std::int64_t total() const noexcept;
};

struct RasterizeResult {
  LightningRaster raster;
  std::size_t matched = 0; // records whose window equals window_start
  std::size_t dropped = 0; // matched records outside the bounding box
};

RasterizeResult rasterize(std::span<const LightningRecord> records,
                          const GridGeometry &geometry, Timestamp window_start);

} // namespace stormcast
