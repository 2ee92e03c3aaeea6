#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "stormcast/raster.hpp"
#include "stormcast/util.hpp"

using namespace stormcast;

namespace {
const GridGeometry kBox{64, 64, 45.0, 55.0, 5.0, 15.0};
Timestamp at(std::int64_t s) { return Timestamp{std::chrono::seconds{s}}; }
} // namespace

TEST_CASE("timestamps parse with explicit zones only") {
  CHECK(parse_timestamp("2017-06-01T13:17:02Z") == at(1496323022));
  CHECK(parse_timestamp("2017-06-01T15:17:02+02:00") == at(1496323022));
  CHECK(parse_timestamp("2017-06-01T13:17:02.75Z") == at(1496323022));
  CHECK_FALSE(parse_timestamp("2017-06-01T13:17:02"));
  CHECK_FALSE(parse_timestamp("not a time"));
  CHECK(format_timestamp(at(1496323022)) == "2017-06-01T13:17:02Z");
}

TEST_CASE("window index truncates to the quarter hour") {
  const auto t = *parse_timestamp("2017-06-01T13:17:02Z");
  CHECK(format_timestamp(window_index(t)) == "2017-06-01T13:15:00Z");
  CHECK(window_index(window_index(t)) == window_index(t));
  CHECK(time_hhmm(t) == 1317);
}

TEST_CASE("offsets round-trip through h:mm") {
  CHECK(parse_offset("1:00") == Minutes{60});
  CHECK(parse_offset("0:45") == Minutes{45});
  CHECK(parse_offset("00:07") == Minutes{7});
  CHECK_FALSE(parse_offset("1:75"));
  CHECK_FALSE(parse_offset("abc"));
  CHECK(format_offset(Minutes{135}) == "2:15");
}

TEST_CASE("channel names round-trip") {
  for (auto c : kChannels) CHECK(parse_channel(channel_name(c)) == c);
  CHECK_FALSE(parse_channel("IR12.0"));
  CHECK(is_reflective(Channel::NIR16));
  CHECK_FALSE(is_reflective(Channel::IR39));
}

TEST_CASE("tile_of agrees with a scan over tile boxes") {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> lat(45.0, 55.0), lon(5.0, 15.0);
  for (int i = 0; i < 2000; ++i) {
    const double a = lat(gen), o = lon(gen);
    const auto want = oracle::tile_scan(kBox, a, o);
    CHECK(tile_of(kBox, a, o) == want);
  }
  CHECK(tile_of(kBox, 55.0, 5.0) == TileIndex{0, 0});
  CHECK(tile_of(kBox, 45.0, 15.0) == TileIndex{63, 63});
  CHECK_THROWS_AS(tile_of(kBox, 44.99, 10.0), Error);
}

TEST_CASE("tile centres map back to their tile") {
  for (int y = 0; y < kBox.height; y += 7) {
    for (int x = 0; x < kBox.width; x += 5) {
      const auto [la, lo] = tile_center(kBox, {x, y});
      CHECK(tile_of(kBox, la, lo) == TileIndex{x, y});
    }
  }
}

TEST_CASE("invalid geometry is rejected") {
  CHECK_THROWS_AS((GridGeometry{0, 4, 0, 1, 0, 1}.validate()), Error);
  CHECK_THROWS_AS((GridGeometry{4, 4, 1, 1, 0, 1}.validate()), Error);
  CHECK(kBox.valid());
}

TEST_CASE("rasterize counts strikes of one window and drops the rest") {
  const Timestamp w = *parse_timestamp("2018-06-01T12:00:00Z");
  std::vector<LightningRecord> recs = {
      {w + Minutes{1}, 54.99, 5.01, 10, 5},  {w + Minutes{14}, 54.99, 5.01, 10, 5},
      {w + Minutes{15}, 54.99, 5.01, 10, 5}, {w + Minutes{3}, 60.0, 5.01, 10, 5},
      {w + Minutes{3}, 45.0, 15.0, -4, 7},
  };
  const auto res = rasterize(recs, kBox, w);
  CHECK(res.matched == 4);
  CHECK(res.dropped == 1);
  CHECK(res.raster.at(0, 0) == 2);
  CHECK(res.raster.at(63, 63) == 1);
  CHECK(res.raster.total() == 3);
}

TEST_CASE("rasterize totals equal a hand count over random records") {
  std::mt19937_64 gen(3);
  const Timestamp w = *parse_timestamp("2018-06-01T12:00:00Z");
  std::uniform_real_distribution<double> lat(44.0, 56.0), lon(4.0, 16.0);
  std::vector<LightningRecord> recs;
  for (int i = 0; i < 500; ++i) recs.push_back({w + Minutes{static_cast<int>(gen() % 30)}, lat(gen), lon(gen), 0, 0});
  std::vector<int> counts(kBox.size(), 0);
  for (const auto &r : recs) {
    if (window_index(r.time) != w) continue;
    const auto t = oracle::tile_scan(kBox, r.lat, r.lon);
    if (t.x >= 0) ++counts[static_cast<std::size_t>(t.y) * 64 + t.x];
  }
  const auto res = rasterize(recs, kBox, w);
  for (std::size_t i = 0; i < counts.size(); ++i) CHECK(res.raster.counts[i] == counts[i]);
}

TEST_CASE("base64 and f32 blocks round-trip") {
  const std::vector<float> v = {0.0f, -1.5f, 3.25e7f, 1e-30f};
  CHECK(decode_f32(encode_f32(v)) == v);
  const std::vector<std::uint8_t> b = {'M', 'a', 'n'};
  CHECK(base64_encode(b) == "TWFu");
  CHECK(base64_decode("TWFu") == b);
  CHECK(base64_encode(std::vector<std::uint8_t>{'M'}) == "TQ==");
}

TEST_CASE("fnv1a matches the published test vector") {
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("parallel_for visits every index once") {
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) CHECK(h == 1);
}
