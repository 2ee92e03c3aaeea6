#include "stormcast/raster.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>

namespace stormcast {

namespace {

constexpr std::array<std::string_view, kChannelCount> kChannelNames = {
    "VIS0.6", "VIS0.8", "NIR1.6", "IR3.9", "WV6.2", "WV7.3", "IR8.7", "IR9.7", "IR10.8"};

bool parse_int(std::string_view s, int &out) {
  if (s.empty()) {
    return false;
  }
  const auto *end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc{} && ptr == end;
}

bool is_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

} // namespace

// ---------------------------------------------------------------------------

std::optional<Timestamp> parse_timestamp(std::string_view text) {
  using namespace std::chrono;
  // YYYY-MM-DD[T ]HH:MM:SS
  if (text.size() < 20 || text[4] != '-' || text[7] != '-' ||
      (text[10] != 'T' && text[10] != ' ') || text[13] != ':' || text[16] != ':') {
    return std::nullopt;
  }
  int yy = 0, mo = 0, dd = 0, hh = 0, mi = 0, ss = 0;
  if (!parse_int(text.substr(0, 4), yy) || !parse_int(text.substr(5, 2), mo) ||
      !parse_int(text.substr(8, 2), dd) || !parse_int(text.substr(11, 2), hh) ||
      !parse_int(text.substr(14, 2), mi) || !parse_int(text.substr(17, 2), ss)) {
    return std::nullopt;
  }
  const year_month_day ymd{year{yy}, month{static_cast<unsigned>(mo)},
                           day{static_cast<unsigned>(dd)}};
  if (!ymd.ok() || hh > 23 || mi > 59 || ss > 60) {
    return std::nullopt;
  }

  std::string_view rest = text.substr(19);
  if (!rest.empty() && rest.front() == '.') {
    std::size_t n = 1;
    while (n < rest.size() && rest[n] >= '0' && rest[n] <= '9') {
      ++n;
    }
    if (n == 1) {
      return std::nullopt;
    }
    rest.remove_prefix(n); // sub-second precision is dropped
  }

  int offset_minutes = 0;
  if (rest == "Z" || rest == "z") {
    offset_minutes = 0;
  } else if (!rest.empty() && (rest.front() == '+' || rest.front() == '-')) {
    const int sign = rest.front() == '-' ? -1 : 1;
    std::string_view zone = rest.substr(1);
    int oh = 0, om = 0;
    if (zone.size() == 5 && zone[2] == ':' && is_digits(zone.substr(0, 2)) &&
        is_digits(zone.substr(3, 2))) {
      parse_int(zone.substr(0, 2), oh);
      parse_int(zone.substr(3, 2), om);
    } else if (zone.size() == 4 && is_digits(zone)) {
      parse_int(zone.substr(0, 2), oh);
      parse_int(zone.substr(2, 2), om);
    } else if (zone.size() == 2 && is_digits(zone)) {
      parse_int(zone, oh);
    } else {
      return std::nullopt;
    }
    if (oh > 23 || om > 59) {
      return std::nullopt;
    }
    offset_minutes = sign * (oh * 60 + om);
  } else {
    return std::nullopt; // no zone designator
  }

  const auto local = sys_days{ymd} + hours{hh} + minutes{mi} + seconds{ss};
  return Timestamp{local - minutes{offset_minutes}};
}

std::string format_timestamp(Timestamp t) {
  using namespace std::chrono;
  const auto day_start = floor<days>(t);
  const year_month_day ymd{day_start};
  const hh_mm_ss hms{t - day_start};
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()));
  return buf;
}

Timestamp window_index(Timestamp t) noexcept {
  return std::chrono::floor<Minutes>(t) -
         Minutes{(std::chrono::floor<Minutes>(t).time_since_epoch().count() % 15 + 15) % 15};
}

int time_hhmm(Timestamp t) noexcept {
  using namespace std::chrono;
  const hh_mm_ss hms{t - floor<days>(t)};
  return static_cast<int>(hms.hours().count() * 100 + hms.minutes().count());
}

std::optional<Minutes> parse_offset(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) {
    return std::nullopt;
  }
  int h = 0, m = 0;
  const auto mm = text.substr(colon + 1);
  if (!is_digits(text.substr(0, colon)) || mm.size() != 2 || !is_digits(mm) ||
      !parse_int(text.substr(0, colon), h) || !parse_int(mm, m) || m > 59) {
    return std::nullopt;
  }
  return Minutes{h * 60 + m};
}

std::string format_offset(Minutes offset) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%d:%02d", static_cast<int>(offset.count() / 60),
                static_cast<int>(offset.count() % 60));
  return buf;
}

// ---------------------------------------------------------------------------

std::string_view channel_name(Channel c) noexcept {
  return kChannelNames[static_cast<std::size_t>(c)];
}

std::optional<Channel> parse_channel(std::string_view name) noexcept {
  for (std::size_t i = 0; i < kChannelCount; ++i) {
    if (kChannelNames[i] == name) {
      return kChannels[i];
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------

bool GridGeometry::valid() const noexcept {
  return width > 0 && height > 0 && std::isfinite(lat_min) && std::isfinite(lat_max) &&
         std::isfinite(lon_min) && std::isfinite(lon_max) && lat_min < lat_max &&
         lon_min < lon_max;
}

void GridGeometry::validate() const {
  if (!valid()) {
    throw Error(ErrorCode::InvalidGeometry,
                "grid " + std::to_string(width) + "x" + std::to_string(height) +
                    " needs positive size and a non-empty lat/lon box");
  }
}

GridGeometry GridGeometry::index_space(int width, int height) {
  return GridGeometry{width, height, 0.0, static_cast<double>(height), 0.0,
                      static_cast<double>(width)};
}

TileIndex tile_of(const GridGeometry &geometry, double lat, double lon) {
  geometry.validate();
  if (!(lat >= geometry.lat_min && lat <= geometry.lat_max && lon >= geometry.lon_min &&
        lon <= geometry.lon_max)) {
    throw Error(ErrorCode::OutOfBounds, "point (" + std::to_string(lat) + ", " +
                                            std::to_string(lon) + ") outside grid box");
  }
  const double fx = (lon - geometry.lon_min) / (geometry.lon_max - geometry.lon_min) * geometry.width;
  const double fy = (geometry.lat_max - lat) / (geometry.lat_max - geometry.lat_min) * geometry.height;
  const int x = std::clamp(static_cast<int>(std::floor(fx)), 0, geometry.width - 1);
  const int y = std::clamp(static_cast<int>(std::floor(fy)), 0, geometry.height - 1);
  return {x, y};
}

std::pair<double, double> tile_center(const GridGeometry &geometry, TileIndex tile) {
  const double dlat = (geometry.lat_max - geometry.lat_min) / geometry.height;
  const double dlon = (geometry.lon_max - geometry.lon_min) / geometry.width;
  return {geometry.lat_max - (tile.y + 0.5) * dlat, geometry.lon_min + (tile.x + 0.5) * dlon};
}

// ---------------------------------------------------------------------------

GridFrame::GridFrame(GridGeometry g, std::string t, Timestamp ts)
    : geometry(g), tag(std::move(t)), timestamp(ts), values(g.size(), 0.0f) {}

GridFrame::GridFrame(GridGeometry g, std::string t, Timestamp ts, std::vector<float> v)
    : geometry(g), tag(std::move(t)), timestamp(ts), values(std::move(v)) {}

void GridFrame::validate() const {
  geometry.validate();
  if (values.size() != geometry.size()) {
    throw Error(ErrorCode::InvalidGeometry,
                "frame '" + tag + "' holds " + std::to_string(values.size()) +
                    " values for a " + std::to_string(geometry.width) + "x" +
                    std::to_string(geometry.height) + " grid");
  }
  if (tag.size() > 16) {
    throw Error(ErrorCode::InvalidArgument, "frame tag longer than 16 bytes: " + tag);
  }
  for (float v : values) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::InvalidArgument, "frame '" + tag + "' contains non-finite values");
    }
  }
}

std::int64_t LightningRaster::total() const noexcept {
  std::int64_t sum = 0;
  for (auto c : counts) {
    sum += c;
  }
  return sum;
}

RasterizeResult rasterize(std::span<const LightningRecord> records, const GridGeometry &geometry,
                          Timestamp window_start) {
  geometry.validate();
  RasterizeResult result;
  result.raster.geometry = geometry;
  result.raster.window_start = window_start;
  result.raster.counts.assign(geometry.size(), 0);

  for (const auto &r : records) {
    if (window_index(r.time) != window_start) {
      continue;
    }
    ++result.matched;
    if (!(r.lat >= geometry.lat_min && r.lat <= geometry.lat_max && r.lon >= geometry.lon_min &&
          r.lon <= geometry.lon_max)) {
      ++result.dropped;
      continue;
    }
    const auto tile = tile_of(geometry, r.lat, r.lon);
    ++result.raster.counts[static_cast<std::size_t>(tile.y) * geometry.width + tile.x];
  }
  return result;
}

} // namespace stormcast
