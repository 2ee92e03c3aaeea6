#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "stormcast/raster.hpp"

namespace stormcast {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  friend bool operator==(const Range &, const Range &) = default;
};

/// Synthetic stand-in for satellite frames and strike records.
///
/// Cloud blobs drift with the wind and reappear upwind when they leave the
/// domain. Convective cells appear at random places, drift with the same
/// wind, deepen for a few steps and then dissipate; while deepening past
/// `lightning_threshold` their cores emit strikes.
struct SceneConfig {
  GridGeometry geometry{64, 64, 45.0, 55.0, 5.0, 15.0};
  int frames = 200;
  Timestamp start = Timestamp{std::chrono::seconds{1527811200}}; // 2018-06-01T00:00:00Z
  double wind_u = 0.6; // tiles per step, eastward
  double wind_v = 0.3; // tiles per step, southward
  int cloud_count = 10;
  Range cloud_sigma{3.0, 7.0};
  Range cloud_intensity{60.0, 130.0};
  double convection_rate = 0.8; // expected new cells per step
  Range cell_sigma{1.5, 3.0};
  double growth_rate = 15.0;    // intensity per step while deepening
  Range growth_steps{3.0, 8.0}; // deepening duration
  double decay_rate = 6.0;      // intensity per step afterwards
  double lightning_threshold = 20.0;
  double lightning_rate = 1.0; // mean strikes per core tile per window
  double diurnal_amplitude = 0.5;
  double noise = 0.5;
  std::uint64_t seed = 0;

  /// Throws BadConfig.
  void validate() const;
  friend bool operator==(const SceneConfig &, const SceneConfig &) = default;
};

nlohmann::json to_json(const SceneConfig &config);
/// Missing keys keep their defaults. Throws BadConfig.
SceneConfig scene_config_from_json(const nlohmann::json &j);

struct Scene {
  std::vector<Timestamp> timestamps;
  /// frames[t][c]: channel c in canonical order at timestamps[t].
  std::vector<std::array<GridFrame, kChannelCount>> frames;
  std::vector<LightningRecord> lightning;
  /// Tiles inside the core of a deepening cell, per timestamp.
  std::vector<std::vector<std::uint8_t>> convection;
};

Scene generate_scene(const SceneConfig &config);

} // namespace stormcast
