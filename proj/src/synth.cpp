#include "stormcast/synth.hpp"

#include <algorithm>
#include <cmath>

#include "stormcast/rng.hpp"

namespace stormcast {

using nlohmann::json;

namespace {

struct Blob {
  double x = 0.0;
  double y = 0.0;
  double sigma = 1.0;
  double intensity = 0.0;
};

struct Cell {
  Blob blob;
  double growth = 0.0;
  int deepening = 0; // steps of growth
  int age = 0;

  bool deepening_now() const noexcept { return age >= 1 && age <= deepening; }
};

/// How strongly cloud (C) and convective (K) intensity move each channel.
struct ChannelResponse {
  double base;
  double cloud_gain;
  double cell_gain;
  bool reflective;
};

constexpr std::array<ChannelResponse, kChannelCount> kResponse = {{
    {30.0, 1.2, 1.0, true},    // VIS0.6
    {30.0, 1.1, 1.0, true},    // VIS0.8
    {25.0, 0.9, 0.8, true},    // NIR1.6
    {240.0, 0.8, 1.0, false},  // IR3.9
    {240.0, 0.5, 1.4, false},  // WV6.2
    {240.0, 0.6, 1.2, false},  // WV7.3
    {240.0, 0.9, 1.0, false},  // IR8.7
    {240.0, 0.7, 0.9, false},  // IR9.7
    {240.0, 1.0, 1.1, false},  // IR10.8
}};

double draw(Rng &rng, const Range &r) { return rng.uniform(r.lo, r.hi); }

/// Daylight weight for reflective channels: 1 - A at night, peaking at noon.
double diurnal(Timestamp t, double amplitude) {
  const auto secs = t.time_since_epoch().count() % 86400;
  const double hour = static_cast<double>(secs < 0 ? secs + 86400 : secs) / 3600.0;
  const double sun = std::max(0.0, std::sin(2.0 * M_PI * (hour - 6.0) / 24.0));
  return 1.0 - amplitude + amplitude * sun;
}

void paint(std::vector<double> &field, int w, int h, const Blob &b) {
  const int reach = static_cast<int>(std::ceil(4.0 * b.sigma));
  const int x0 = std::max(0, static_cast<int>(std::floor(b.x)) - reach);
  const int x1 = std::min(w - 1, static_cast<int>(std::ceil(b.x)) + reach);
  const int y0 = std::max(0, static_cast<int>(std::floor(b.y)) - reach);
  const int y1 = std::min(h - 1, static_cast<int>(std::ceil(b.y)) + reach);
  const double inv = 1.0 / (2.0 * b.sigma * b.sigma);
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double dx = x - b.x;
      const double dy = y - b.y;
      field[static_cast<std::size_t>(y) * w + x] += b.intensity * std::exp(-(dx * dx + dy * dy) * inv);
    }
  }
}

bool outside(const Blob &b, int w, int h) {
  const double m = 3.0 * b.sigma;
  return b.x < -m - 1.0 || b.x > w + m || b.y < -m - 1.0 || b.y > h + m;
}

/// New cloud just beyond the upwind edge.
Blob spawn_upwind(Rng &rng, const SceneConfig &c) {
  const int w = c.geometry.width;
  const int h = c.geometry.height;
  Blob b;
  b.sigma = draw(rng, c.cloud_sigma);
  b.intensity = draw(rng, c.cloud_intensity);
  const double m = 3.0 * b.sigma;
  const double along = rng.uniform();
  if (std::abs(c.wind_u) >= std::abs(c.wind_v)) {
    b.x = c.wind_u >= 0.0 ? -m : w - 1 + m;
    b.y = along * (h - 1);
  } else {
    b.y = c.wind_v >= 0.0 ? -m : h - 1 + m;
    b.x = along * (w - 1);
  }
  return b;
}

} // namespace

void SceneConfig::validate() const {
  auto fail = [](const std::string &m) { throw Error(ErrorCode::BadConfig, "scene: " + m); };
  geometry.validate();
  if (frames < 3) fail("frame count must be >= 3");
  auto range_ok = [](const Range &r, double min) { return r.lo >= min && r.hi >= r.lo && std::isfinite(r.hi); };
  if (!range_ok(cloud_sigma, 1e-9) || !range_ok(cell_sigma, 1e-9)) fail("blob sizes must be positive ranges");
  if (!range_ok(cloud_intensity, 0.0)) fail("cloud intensity must be a non-negative range");
  if (!range_ok(growth_steps, 1.0)) fail("growth steps must be >= 1");
  if (cloud_count < 0) fail("cloud count must be >= 0");
  for (double v : {convection_rate, growth_rate, decay_rate, lightning_rate, lightning_threshold, noise}) {
    if (!(v >= 0.0) || !std::isfinite(v)) fail("rates must be finite and >= 0");
  }
  if (!(diurnal_amplitude >= 0.0 && diurnal_amplitude <= 1.0)) fail("diurnal amplitude must lie in [0, 1]");
  if (!std::isfinite(wind_u) || !std::isfinite(wind_v)) fail("wind must be finite");
  if (start.time_since_epoch().count() % 900 != 0) fail("start must lie on the 15 minute lattice");
}

json to_json(const SceneConfig &c) {
  auto range = [](const Range &r) { return json::array({r.lo, r.hi}); };
  return {{"width", c.geometry.width},
          {"height", c.geometry.height},
          {"lat_min", c.geometry.lat_min},
          {"lat_max", c.geometry.lat_max},
          {"lon_min", c.geometry.lon_min},
          {"lon_max", c.geometry.lon_max},
          {"frames", c.frames},
          {"start", format_timestamp(c.start)},
          {"wind_u", c.wind_u},
          {"wind_v", c.wind_v},
          {"cloud_count", c.cloud_count},
          {"cloud_sigma", range(c.cloud_sigma)},
          {"cloud_intensity", range(c.cloud_intensity)},
          {"convection_rate", c.convection_rate},
          {"cell_sigma", range(c.cell_sigma)},
          {"growth_rate", c.growth_rate},
          {"growth_steps", range(c.growth_steps)},
          {"decay_rate", c.decay_rate},
          {"lightning_threshold", c.lightning_threshold},
          {"lightning_rate", c.lightning_rate},
          {"diurnal_amplitude", c.diurnal_amplitude},
          {"noise", c.noise},
          {"seed", c.seed}};
}

SceneConfig scene_config_from_json(const json &j) {
  SceneConfig c;
  try {
    auto range = [&](const char *key, Range &r) {
      if (!j.contains(key)) return;
      const auto &a = j.at(key);
      if (!a.is_array() || a.size() != 2) throw Error(ErrorCode::BadConfig, std::string(key) + " must be [lo, hi]");
      r = {a.at(0).get<double>(), a.at(1).get<double>()};
    };
    c.geometry.width = j.value("width", c.geometry.width);
    c.geometry.height = j.value("height", c.geometry.height);
    c.geometry.lat_min = j.value("lat_min", c.geometry.lat_min);
    c.geometry.lat_max = j.value("lat_max", c.geometry.lat_max);
    c.geometry.lon_min = j.value("lon_min", c.geometry.lon_min);
    c.geometry.lon_max = j.value("lon_max", c.geometry.lon_max);
    c.frames = j.value("frames", c.frames);
    if (j.contains("start")) {
      const auto t = parse_timestamp(j.at("start").get<std::string>());
      if (!t) throw Error(ErrorCode::BadConfig, "scene start must be an ISO-8601 UTC timestamp");
      c.start = *t;
    }
    c.wind_u = j.value("wind_u", c.wind_u);
    c.wind_v = j.value("wind_v", c.wind_v);
    c.cloud_count = j.value("cloud_count", c.cloud_count);
    range("cloud_sigma", c.cloud_sigma);
    range("cloud_intensity", c.cloud_intensity);
    c.convection_rate = j.value("convection_rate", c.convection_rate);
    range("cell_sigma", c.cell_sigma);
    c.growth_rate = j.value("growth_rate", c.growth_rate);
    range("growth_steps", c.growth_steps);
    c.decay_rate = j.value("decay_rate", c.decay_rate);
    c.lightning_threshold = j.value("lightning_threshold", c.lightning_threshold);
    c.lightning_rate = j.value("lightning_rate", c.lightning_rate);
    c.diurnal_amplitude = j.value("diurnal_amplitude", c.diurnal_amplitude);
    c.noise = j.value("noise", c.noise);
    c.seed = j.value("seed", c.seed);
  } catch (const json::exception &e) {
    throw Error(ErrorCode::BadConfig, std::string("scene config: ") + e.what());
  }
  c.validate();
  return c;
}

Scene generate_scene(const SceneConfig &config) {
  config.validate();
  const int w = config.geometry.width;
  const int h = config.geometry.height;
  const std::size_t n = config.geometry.size();
  Rng rng(config.seed);

  std::vector<Blob> clouds;
  for (int i = 0; i < config.cloud_count; ++i) {
    Blob b;
    b.sigma = draw(rng, config.cloud_sigma);
    b.intensity = draw(rng, config.cloud_intensity);
    b.x = rng.uniform(0.0, w - 1.0);
    b.y = rng.uniform(0.0, h - 1.0);
    clouds.push_back(b);
  }
  std::vector<Cell> cells;

  Scene scene;
  std::vector<double> cloud_field(n);
  std::vector<double> cell_field(n);
  const double lat_step = (config.geometry.lat_max - config.geometry.lat_min) / h;
  const double lon_step = (config.geometry.lon_max - config.geometry.lon_min) / w;

  for (int step = 0; step < config.frames; ++step) {
    const Timestamp t = config.start + step * kWindowLength;
    if (step > 0) {
      for (auto &b : clouds) {
        b.x += config.wind_u;
        b.y += config.wind_v;
        if (outside(b, w, h)) b = spawn_upwind(rng, config);
      }
      for (auto &c : cells) {
        c.blob.x += config.wind_u;
        c.blob.y += config.wind_v;
        ++c.age;
        c.blob.intensity = c.age <= c.deepening
                               ? c.growth * c.age
                               : c.growth * c.deepening - config.decay_rate * (c.age - c.deepening);
      }
      std::erase_if(cells, [&](const Cell &c) { return c.blob.intensity <= 0.0 || outside(c.blob, w, h); });
    }
    // new cells start at zero intensity and deepen from the next step on
    const auto births = rng.poisson(config.convection_rate);
    for (std::uint32_t i = 0; i < births; ++i) {
      Cell c;
      c.blob.sigma = draw(rng, config.cell_sigma);
      c.blob.x = rng.uniform(4.0, w - 5.0);
      c.blob.y = rng.uniform(4.0, h - 5.0);
      c.growth = config.growth_rate * rng.uniform(0.8, 1.2);
      c.deepening = static_cast<int>(std::lround(draw(rng, config.growth_steps)));
      cells.push_back(c);
    }

    std::fill(cloud_field.begin(), cloud_field.end(), 0.0);
    std::fill(cell_field.begin(), cell_field.end(), 0.0);
    for (const auto &b : clouds) paint(cloud_field, w, h, b);
    for (const auto &c : cells) paint(cell_field, w, h, c.blob);

    // strikes from the cores of deepening cells, in [t, t + 15 min)
    std::vector<std::uint8_t> mask(n, 0);
    for (const auto &c : cells) {
      if (!c.deepening_now() || c.blob.intensity < config.lightning_threshold) continue;
      const double core2 = 2.0 * c.blob.sigma * c.blob.sigma * std::log(2.0);
      const int reach = static_cast<int>(std::ceil(2.0 * c.blob.sigma));
      for (int y = std::max(0, static_cast<int>(c.blob.y) - reach);
           y <= std::min(h - 1, static_cast<int>(c.blob.y) + reach); ++y) {
        for (int x = std::max(0, static_cast<int>(c.blob.x) - reach);
             x <= std::min(w - 1, static_cast<int>(c.blob.x) + reach); ++x) {
          const double dx = x - c.blob.x;
          const double dy = y - c.blob.y;
          if (dx * dx + dy * dy >= core2) continue;
          mask[static_cast<std::size_t>(y) * w + x] = 1;
          const auto strikes = rng.poisson(config.lightning_rate);
          for (std::uint32_t s = 0; s < strikes; ++s) {
            LightningRecord r;
            r.time = t + Minutes{static_cast<int>(rng.below(15))};
            r.lat = config.geometry.lat_max - (y + rng.uniform(0.05, 0.95)) * lat_step;
            r.lon = config.geometry.lon_min + (x + rng.uniform(0.05, 0.95)) * lon_step;
            r.charge_ka = std::round(rng.uniform(-40.0, 40.0) * 10.0) / 10.0;
            r.height_km = std::round(rng.uniform(0.0, 12.0) * 10.0) / 10.0;
            scene.lightning.push_back(r);
          }
        }
      }
    }

    const double day = diurnal(t, config.diurnal_amplitude);
    std::array<GridFrame, kChannelCount> frames;
    for (std::size_t ch = 0; ch < kChannelCount; ++ch) {
      const auto &resp = kResponse[ch];
      GridFrame f(config.geometry, std::string(channel_name(kChannels[ch])), t);
      for (std::size_t i = 0; i < n; ++i) {
        const double signal = resp.cloud_gain * cloud_field[i] + resp.cell_gain * cell_field[i];
        double v = resp.reflective ? resp.base + day * signal : resp.base - signal;
        if (config.noise > 0.0) v += config.noise * rng.normal();
        f.values[i] = static_cast<float>(std::max(0.0, v));
      }
      frames[ch] = std::move(f);
    }
    scene.timestamps.push_back(t);
    scene.frames.push_back(std::move(frames));
    scene.convection.push_back(std::move(mask));
  }
  return scene;
}

} // namespace stormcast
