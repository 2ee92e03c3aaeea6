#include <doctest.h>

#include <random>
#include <set>

#include "oracles.hpp"
#include "stormcast/features.hpp"

using namespace stormcast;

namespace {

GridFrame random_frame(int w, int h, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<float> d(-50.0f, 300.0f);
  GridFrame f(GridGeometry::index_space(w, h), "r", Timestamp{std::chrono::seconds{1527811200}});
  for (auto &v : f.values) v = d(gen);
  return f;
}

std::set<std::pair<int, int>> kernels_of(SchemaVariant v) {
  std::set<std::pair<int, int>> out;
  for (const auto &c : schema_columns(v)) {
    if (c.kind == FeatureColumn::Kind::Convolution) out.insert({static_cast<int>(c.kernel.kind), c.kernel.size});
  }
  return out;
}

} // namespace

TEST_CASE("reflect padding mirrors about the edge") {
  for (int n : {1, 2, 5}) {
    for (int i = -12; i < 12; ++i) CHECK(reflect_index(i, n) == oracle::mirror(i, n));
  }
  CHECK(reflect_index(-1, 4) == 0);
  CHECK(reflect_index(4, 4) == 3);
}

TEST_CASE("filters match the brute-force window on small odd frames") {
  for (int size : {1, 3, 5, 7, 9}) {
    for (auto kind : {KernelKind::Max, KernelKind::Min, KernelKind::Avg, KernelKind::Gauss}) {
      const auto f = random_frame(11, 5, static_cast<std::uint64_t>(size) * 31 + static_cast<int>(kind));
      const KernelSpec spec = kind == KernelKind::Gauss ? KernelSpec::gaussian(size) : KernelSpec{kind, size, 0.0};
      const auto got = conv_filter(f, spec);
      const auto want = oracle::filter(f, spec);
      for (std::size_t i = 0; i < want.size(); ++i) {
        if (kind == KernelKind::Max || kind == KernelKind::Min) {
          CHECK(got.values[i] == static_cast<float>(want[i]));
        } else {
          CHECK(std::abs(got.values[i] - want[i]) <= 1e-5 * std::max(1.0, std::abs(want[i])));
        }
      }
    }
  }
}

TEST_CASE("windows larger than the frame still mirror correctly") {
  const auto f = random_frame(3, 2, 9);
  for (auto kind : {KernelKind::Max, KernelKind::Avg}) {
    const KernelSpec spec{kind, 9, 0.0};
    const auto got = conv_filter(f, spec);
    const auto want = oracle::filter(f, spec);
    for (std::size_t i = 0; i < want.size(); ++i) CHECK(got.values[i] == doctest::Approx(want[i]).epsilon(1e-6));
  }
}

TEST_CASE("gaussian weights are normalised and symmetric") {
  const auto k = gaussian_kernel(7, 7 / 6.0);
  double sum = 0.0;
  for (double v : k) sum += v;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(k[0] == doctest::Approx(k[48]));
  CHECK(k[3 * 7 + 3] == doctest::Approx(*std::max_element(k.begin(), k.end())));
}

TEST_CASE("bad kernels are rejected") {
  CHECK_THROWS_AS((KernelSpec{KernelKind::Max, 4, 0}.validate()), Error);
  CHECK_THROWS_AS((KernelSpec{KernelKind::Gauss, 5, 0}.validate()), Error);
  CHECK_THROWS_AS((KernelSpec{KernelKind::Identity, 3, 0}.validate()), Error);
}

TEST_CASE("schemas have the documented sizes and unique names") {
  const auto e = build_schema(SchemaVariant::ErrorOnly153);
  const auto x = build_schema(SchemaVariant::Extended129);
  CHECK(e.size() == 153);
  CHECK(x.size() == 129);
  for (const auto *s : {&e, &x}) {
    CHECK(std::set<std::string>(s->names.begin(), s->names.end()).size() == s->size());
  }
  CHECK(e.fingerprint() != x.fingerprint());
  CHECK(parse_variant("extended_129") == SchemaVariant::Extended129);
  CHECK(parse_variant(variant_name(SchemaVariant::ErrorOnly153)) == SchemaVariant::ErrorOnly153);
  CHECK_FALSE(parse_variant("wide"));
}

TEST_CASE("schema columns and names agree") {
  for (auto v : {SchemaVariant::ErrorOnly153, SchemaVariant::Extended129}) {
    const auto cols = schema_columns(v);
    const auto schema = build_schema(v);
    REQUIRE(cols.size() == schema.size());
    for (std::size_t i = 0; i < cols.size(); ++i) CHECK(column_name(cols[i]) == schema.names[i]);
  }
}

TEST_CASE("assemble samples the filtered frames at the requested tiles") {
  const GridGeometry g{12, 10, 45, 55, 5, 15};
  const Timestamp t = *parse_timestamp("2018-06-01T13:45:00Z");
  std::vector<GridFrame> errors, raws;
  for (std::size_t c = 0; c < kChannelCount; ++c) {
    auto e = random_frame(12, 10, 100 + c);
    e.geometry = g;
    e.timestamp = t;
    errors.push_back(e);
    auto r = random_frame(12, 10, 200 + c);
    r.geometry = g;
    r.timestamp = t;
    raws.push_back(r);
  }
  const std::vector<TileIndex> tiles = {{0, 0}, {11, 9}, {5, 3}};
  for (auto variant : {SchemaVariant::ErrorOnly153, SchemaVariant::Extended129}) {
    const bool raw = variant == SchemaVariant::Extended129;
    const auto m = assemble(errors, raw ? std::span<const GridFrame>(raws) : std::span<const GridFrame>(), variant, tiles);
    const auto cols = schema_columns(variant);
    REQUIRE(m.rows() == tiles.size());
    REQUIRE(m.cols() == cols.size());
    for (std::size_t r = 0; r < tiles.size(); ++r) {
      CHECK(m.keys[r] == RowKey{t.time_since_epoch().count(), tiles[r].x, tiles[r].y});
      for (std::size_t j = 0; j < cols.size(); ++j) {
        const auto &col = cols[j];
        double want = 0.0;
        switch (col.kind) {
        case FeatureColumn::Kind::TimeHhmm: want = 1345; break;
        case FeatureColumn::Kind::CoordX: want = tiles[r].x; break;
        case FeatureColumn::Kind::CoordY: want = tiles[r].y; break;
        case FeatureColumn::Kind::Convolution: {
          const auto &src = col.source == FeatureSource::Error ? errors : raws;
          const auto f = oracle::filter(src[static_cast<std::size_t>(col.channel)], col.kernel);
          want = f[static_cast<std::size_t>(tiles[r].y) * 12 + tiles[r].x];
        }
        }
        CHECK(m.row(r)[j] == doctest::Approx(want).epsilon(1e-5));
      }
    }
  }
}

TEST_CASE("assemble refuses raw frames the schema does not use") {
  std::vector<GridFrame> frames(kChannelCount, random_frame(4, 4, 1));
  const std::vector<TileIndex> tiles = {{0, 0}};
  CHECK_THROWS_AS(assemble(frames, frames, SchemaVariant::ErrorOnly153, tiles), Error);
  CHECK_THROWS_AS(assemble(frames, {}, SchemaVariant::Extended129, tiles), Error);
}

TEST_CASE("every schema kernel is covered by the oracle comparison") {
  std::set<std::pair<int, int>> all = kernels_of(SchemaVariant::ErrorOnly153);
  const auto ext = kernels_of(SchemaVariant::Extended129);
  all.insert(ext.begin(), ext.end());
  CHECK(all.size() >= 4);
}

TEST_CASE("min-max normalisation clamps and handles constant columns") {
  FeatureMatrix m;
  m.schema.names = {"a", "b"};
  m.keys.resize(3);
  m.values = {0, 5, 10, 5, 20, 5};
  const auto stats = compute_stats(m);
  CHECK(stats.min == std::vector<float>{0, 5});
  CHECK(stats.max == std::vector<float>{20, 5});
  FeatureMatrix probe = m;
  probe.values = {-10, 7, 30, 5, 10, 5};
  const auto n = normalize(probe, stats);
  CHECK(n.values == std::vector<float>{0, 0, 1, 0, 0.5f, 0});
}

TEST_CASE("matrix subset and append keep rows aligned") {
  FeatureMatrix m;
  m.schema.names = {"a", "b"};
  m.keys = {{1, 0, 0}, {2, 0, 0}, {3, 0, 0}};
  m.values = {1, 2, 3, 4, 5, 6};
  const std::vector<std::size_t> idx = {2, 0};
  const auto s = m.subset(idx);
  CHECK(s.values == std::vector<float>{5, 6, 1, 2});
  CHECK(s.keys[0].timestamp == 3);
  auto a = s;
  a.append(m);
  CHECK(a.rows() == 5);
  CHECK_NOTHROW(a.validate());
  a.values.pop_back();
  CHECK_THROWS_AS(a.validate(), Error);
}
