#include <doctest.h>

#include <random>
#include <set>

#include "stormcast/sampling.hpp"

using namespace stormcast;

namespace {

const GridGeometry kBox{16, 16, 45, 55, 5, 15};
const Timestamp kT0 = Timestamp{std::chrono::seconds{1527811200}};

LightningRaster raster_with(Timestamp w, const std::vector<TileIndex> &hits) {
  LightningRaster r{kBox, w, std::vector<std::int32_t>(kBox.size(), 0)};
  for (auto t : hits) r.counts[static_cast<std::size_t>(t.y) * kBox.width + t.x] += 1;
  return r;
}

std::vector<Timestamp> lattice(int n, int step_minutes = 15) {
  std::vector<Timestamp> out;
  for (int i = 0; i < n; ++i) out.push_back(kT0 + Minutes{step_minutes * i});
  return out;
}

} // namespace

TEST_CASE("offsets must sit on the quarter-hour lattice within five hours") {
  CHECK_NOTHROW(validate_offset(Minutes{0}));
  CHECK_NOTHROW(validate_offset(Minutes{300}));
  CHECK_THROWS_AS(validate_offset(Minutes{7}), Error);
  CHECK_THROWS_AS(validate_offset(Minutes{315}), Error);
  CHECK_THROWS_AS(validate_offset(Minutes{-15}), Error);
}

TEST_CASE("labels come from the window at t0 plus the offset") {
  RasterSeries s;
  s[kT0] = raster_with(kT0, {{1, 1}});
  s[kT0 + Minutes{60}] = raster_with(kT0 + Minutes{60}, {{2, 3}, {2, 3}});
  const auto now = label_tiles(s, kT0, Minutes{0});
  CHECK(now.at(1, 1) == 1);
  CHECK(now.at(2, 3) == 0);
  const auto later = label_tiles(s, kT0, Minutes{60});
  CHECK(later.at(2, 3) == 1);
  CHECK(later.at(1, 1) == 0);
  CHECK(later.window_start == kT0 + Minutes{60});
  CHECK_THROWS_AS(label_tiles(s, kT0, Minutes{15}), Error);
}

TEST_CASE("balancing keeps every positive and as many negatives") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 gen(seed);
    std::vector<TileIndex> hits;
    for (int i = 0; i < 1 + static_cast<int>(gen() % 40); ++i) hits.push_back({static_cast<int>(gen() % 16), static_cast<int>(gen() % 16)});
    const auto labels = label_tiles(raster_with(kT0, hits));
    const auto sel = balance_per_image(labels, seed);
    const std::size_t positives = std::count(labels.labels.begin(), labels.labels.end(), 1);
    REQUIRE_FALSE(sel.degenerate);
    CHECK(sel.positives == positives);
    CHECK(sel.negatives == positives);
    std::set<TileIndex> unique(sel.tiles.begin(), sel.tiles.end());
    CHECK(unique.size() == sel.tiles.size());
    for (std::size_t i = 0; i < sel.tiles.size(); ++i) {
      CHECK(labels.at(sel.tiles[i].x, sel.tiles[i].y) == (i < positives ? 1 : 0));
    }
    CHECK(balance_per_image(labels, seed).tiles == sel.tiles);
  }
}

TEST_CASE("frames with no strikes contribute nothing") {
  const auto sel = balance_per_image(label_tiles(raster_with(kT0, {})), 1);
  CHECK(sel.tiles.empty());
  CHECK_FALSE(sel.degenerate);
}

TEST_CASE("frames with more positives than negatives keep everything") {
  std::vector<TileIndex> hits;
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 12; ++x) hits.push_back({x, y});
  }
  const auto sel = balance_per_image(label_tiles(raster_with(kT0, hits)), 3);
  CHECK(sel.degenerate);
  CHECK(sel.tiles.size() == kBox.size());
}

TEST_CASE("folds are contiguous, ordered and separated by the margin") {
  const auto stamps = lattice(4 * 24 * 6); // six days
  for (std::size_t k : {2u, 3u, 4u, 5u}) {
    const auto spec = make_folds(stamps, k, Minutes{720});
    REQUIRE(spec.folds.size() == k);
    CHECK_NOTHROW(spec.validate());
    for (std::size_t i = 0; i + 1 < k; ++i) {
      CHECK(spec.folds[i].end < spec.folds[i + 1].start);
      CHECK(spec.folds[i + 1].start - spec.folds[i].end >= Minutes{720});
    }
    std::optional<std::size_t> last;
    for (auto t : stamps) {
      const auto f = spec.fold_of(t);
      if (!f) continue;
      if (last) CHECK(*f >= *last);
      last = f;
    }
  }
}

TEST_CASE("folds json round-trips") {
  const auto spec = make_folds(lattice(400), 3, Minutes{720}, 9);
  const auto back = fold_spec_from_json(to_json(spec));
  REQUIRE(back.folds.size() == 3);
  CHECK(back.folds[1].start == spec.folds[1].start);
  CHECK(back.margin == spec.margin);
  CHECK(back.seed == 9);
}

TEST_CASE("too little time for the margin is reported") {
  CHECK_THROWS_AS(make_folds(lattice(150), 4, Minutes{720}), Error);
  CHECK_THROWS_AS(make_folds(lattice(3), 4, Minutes{0}), Error);
}

TEST_CASE("frame seeds are the run seed xor the frame index") {
  CHECK(frame_seed(0b1010, 0b0110) == 0b1100);
  CHECK(frame_seed(42, 0) == 42);
}

TEST_CASE("labeled dataset fold views exclude gap rows") {
  LabeledDataset d;
  d.features.schema.names = {"a"};
  d.features.keys.resize(5);
  d.features.values = {1, 2, 3, 4, 5};
  d.labels = {0, 1, 0, 1, 0};
  d.folds = {0, 0, -1, 1, 1};
  CHECK(d.rows_in_fold(1) == std::vector<std::size_t>{3, 4});
  CHECK(d.rows_outside_fold(1) == std::vector<std::size_t>{0, 1});
  CHECK_NOTHROW(d.validate());
}
