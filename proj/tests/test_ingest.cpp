#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "stormcast/ingest.hpp"
#include "temp_dir.hpp"

using namespace stormcast;
namespace fs = std::filesystem;

namespace {
const GridGeometry kBox{8, 6, 45.0, 55.0, 5.0, 15.0};
} // namespace

TEST_CASE("frames round-trip bit-exactly") {
  TempDir dir;
  GridFrame f(kBox, "IR10.8", *parse_timestamp("2018-06-01T12:15:00Z"));
  for (std::size_t i = 0; i < f.values.size(); ++i) f.values[i] = static_cast<float>(i) * 0.37f - 2.0f;
  store_frame(f, dir.path / "f.grid");
  const auto g = load_frame(dir.path / "f.grid", kBox);
  CHECK(g.values == f.values);
  CHECK(g.tag == f.tag);
  CHECK(g.timestamp == f.timestamp);
  CHECK(g.geometry == kBox);
  CHECK(load_frame(dir.path / "f.grid").geometry == GridGeometry::index_space(8, 6));
  CHECK(fs::file_size(dir.path / "f.grid") == kHeaderSize + 8 * 6 * 4);
}

TEST_CASE("corrupt grid files are rejected") {
  TempDir dir;
  GridFrame f(kBox, "x", *parse_timestamp("2018-06-01T12:15:00Z"));
  store_frame(f, dir.path / "f.grid");
  SUBCASE("bad magic") {
    std::fstream io(dir.path / "f.grid", std::ios::in | std::ios::out | std::ios::binary);
    io.write("XXXX", 4);
    io.close();
    CHECK_THROWS_WITH_AS(read_grid_file(dir.path / "f.grid"), doctest::Contains("BadMagic"), Error);
  }
  SUBCASE("truncated") {
    fs::resize_file(dir.path / "f.grid", kHeaderSize + 10);
    CHECK_THROWS_AS(read_grid_file(dir.path / "f.grid"), Error);
  }
  SUBCASE("missing") { CHECK_THROWS_AS(read_grid_file(dir.path / "nope.grid"), Error); }
}

TEST_CASE("rasters round-trip as int32") {
  TempDir dir;
  LightningRaster r{kBox, *parse_timestamp("2018-06-01T12:15:00Z"), std::vector<std::int32_t>(kBox.size(), 0)};
  r.counts[5] = 3;
  store_raster(r, dir.path / "r.grid");
  const auto back = load_raster(dir.path / "r.grid", kBox);
  CHECK(back.counts == r.counts);
  CHECK(back.window_start == r.window_start);
  CHECK(read_grid_file(dir.path / "r.grid").header.dtype == Dtype::Int32);
}

TEST_CASE("lightning csv skips malformed rows and reports them") {
  TempDir dir;
  {
    std::ofstream out(dir.path / "l.csv");
    out << "time,lat,lon,charge_ka,height_km\n"
        << "2018-06-01T12:01:30Z,50.0,10.0,-12.5,7.1\n"
        << "2018-06-01T12:01:30,50.0,10.0,-12.5,7.1\n"
        << "2018-06-01T12:02:00Z,fifty,10.0,1,1\n"
        << "2018-06-01T12:03:00+01:00,51.0,11.0,3,0\n";
  }
  const auto csv = parse_lightning_csv(dir.path / "l.csv");
  REQUIRE(csv.records.size() == 2);
  CHECK(csv.skipped.size() == 2);
  CHECK(csv.skipped[0].line == 3);
  CHECK(format_timestamp(csv.records[1].time) == "2018-06-01T11:03:00Z");

  write_lightning_csv(dir.path / "w.csv", csv.records);
  const auto again = parse_lightning_csv(dir.path / "w.csv");
  REQUIRE(again.records.size() == 2);
  CHECK(again.records[0].lat == csv.records[0].lat);
  CHECK(again.records[0].charge_ka == csv.records[0].charge_ka);
}

TEST_CASE("csv without the expected header fails") {
  TempDir dir;
  {
    std::ofstream out(dir.path / "l.csv");
    out << "a,b,c\n1,2,3\n";
  }
  CHECK_THROWS_AS(parse_lightning_csv(dir.path / "l.csv"), Error);
}

TEST_CASE("feature matrices keep schema and keys") {
  TempDir dir;
  FeatureMatrix m;
  m.schema = build_schema(SchemaVariant::Extended129);
  m.keys = {{1527811200, 3, 4}, {1527812100, 0, 63}};
  m.values.resize(2 * m.cols());
  for (std::size_t i = 0; i < m.values.size(); ++i) m.values[i] = static_cast<float>(i);
  store_matrix(m, dir.path / "m.grid", {{"config_hash", "abc"}});
  const auto back = load_matrix(dir.path / "m.grid");
  CHECK(back.values == m.values);
  CHECK(back.keys == m.keys);
  CHECK(back.schema.names == m.schema.names);
  CHECK(back.schema.fingerprint() == m.schema.fingerprint());
  CHECK(load_matrix_sidecar(dir.path / "m.grid")["config_hash"] == "abc");
}
