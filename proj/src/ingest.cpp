#include "stormcast/ingest.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace stormcast {

namespace fs = std::filesystem;

namespace {

template <typename T> void put_le(std::vector<std::uint8_t> &out, T value) {
  using U = std::make_unsigned_t<T>;
  auto bits = static_cast<U>(value);
  for (std::size_t b = 0; b < sizeof(T); ++b) {
    out.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
  }
}

template <typename T> T get_le(const std::uint8_t *p) {
  using U = std::make_unsigned_t<T>;
  U bits = 0;
  for (std::size_t b = 0; b < sizeof(T); ++b) {
    bits |= static_cast<U>(static_cast<U>(p[b]) << (8 * b));
  }
  return static_cast<T>(bits);
}

std::vector<std::uint8_t> read_all(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::IoError, "cannot open " + path.string());
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::uint8_t> f32_payload(std::span<const float> values) {
  std::vector<std::uint8_t> out;
  out.reserve(values.size() * 4);
  for (float v : values) {
    put_le(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

std::vector<std::uint8_t> i32_payload(std::span<const std::int32_t> values) {
  std::vector<std::uint8_t> out;
  out.reserve(values.size() * 4);
  for (auto v : values) {
    put_le(out, v);
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool parse_double(std::string_view s, double &out) {
  s = trim(s);
  if (s.empty()) {
    return false;
  }
  if (s.front() == '+') {
    s.remove_prefix(1);
  }
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size() && std::isfinite(out);
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      parts.push_back(line.substr(start));
      return parts;
    }
    parts.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

} // namespace

// ---------------------------------------------------------------------------

void write_grid_file(const fs::path &path, const FileHeader &header,
                     std::span<const std::uint8_t> payload) {
  if (header.tag.size() > 16) {
    throw Error(ErrorCode::InvalidArgument, "tag longer than 16 bytes: " + header.tag);
  }
  if (payload.size() != static_cast<std::size_t>(header.width) * header.height * 4) {
    throw Error(ErrorCode::InvalidArgument, "payload size does not match header dimensions");
  }
  std::vector<std::uint8_t> bytes(kFileMagic, kFileMagic + 8);
  bytes.reserve(kHeaderSize + payload.size());
  put_le(bytes, static_cast<std::uint32_t>(header.dtype));
  put_le(bytes, header.width);
  put_le(bytes, header.height);
  std::uint8_t tag[16] = {};
  std::memcpy(tag, header.tag.data(), header.tag.size());
  bytes.insert(bytes.end(), tag, tag + 16);
  put_le(bytes, header.timestamp);
  bytes.insert(bytes.end(), payload.begin(), payload.end());

  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::IoError, "cannot write " + path.string());
  }
  out.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw Error(ErrorCode::IoError, "short write to " + path.string());
  }
}

GridFile read_grid_file(const fs::path &path) {
  const auto bytes = read_all(path);
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kFileMagic, 8) != 0) {
    throw Error(ErrorCode::BadMagic, path.string() + " is not a STRMCST1 file");
  }
  if (bytes.size() < kHeaderSize) {
    throw Error(ErrorCode::TruncatedPayload, path.string() + ": header truncated");
  }
  GridFile file;
  const auto dtype = get_le<std::uint32_t>(bytes.data() + 8);
  if (dtype != 1 && dtype != 2) {
    throw Error(ErrorCode::UnknownDtype, path.string() + ": dtype " + std::to_string(dtype));
  }
  file.header.dtype = static_cast<Dtype>(dtype);
  file.header.width = get_le<std::uint32_t>(bytes.data() + 12);
  file.header.height = get_le<std::uint32_t>(bytes.data() + 16);
  const char *tag = reinterpret_cast<const char *>(bytes.data() + 20);
  file.header.tag.assign(tag, strnlen(tag, 16));
  file.header.timestamp = get_le<std::int64_t>(bytes.data() + 36);

  const std::size_t count = static_cast<std::size_t>(file.header.width) * file.header.height;
  if (bytes.size() - kHeaderSize != count * 4) {
    throw Error(ErrorCode::TruncatedPayload,
                path.string() + ": payload holds " + std::to_string(bytes.size() - kHeaderSize) +
                    " bytes, header claims " + std::to_string(count * 4));
  }
  const std::uint8_t *p = bytes.data() + kHeaderSize;
  if (file.header.dtype == Dtype::Float32) {
    file.f32.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      file.f32[i] = std::bit_cast<float>(get_le<std::uint32_t>(p + 4 * i));
    }
  } else {
    file.i32.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      file.i32[i] = get_le<std::int32_t>(p + 4 * i);
    }
  }
  return file;
}

// ---------------------------------------------------------------------------

void store_frame(const GridFrame &frame, const fs::path &path) {
  frame.validate();
  FileHeader header{Dtype::Float32, static_cast<std::uint32_t>(frame.width()),
                    static_cast<std::uint32_t>(frame.height()), frame.tag,
                    frame.timestamp.time_since_epoch().count()};
  write_grid_file(path, header, f32_payload(frame.values));
}

GridFrame load_frame(const fs::path &path) {
  auto file = read_grid_file(path);
  if (file.header.dtype != Dtype::Float32) {
    throw Error(ErrorCode::UnknownDtype, path.string() + ": frames must be float32");
  }
  const auto geometry = GridGeometry::index_space(static_cast<int>(file.header.width),
                                                  static_cast<int>(file.header.height));
  return GridFrame(geometry, file.header.tag, Timestamp{std::chrono::seconds{file.header.timestamp}},
                   std::move(file.f32));
}

GridFrame load_frame(const fs::path &path, const GridGeometry &geometry) {
  auto frame = load_frame(path);
  if (frame.width() != geometry.width || frame.height() != geometry.height) {
    throw Error(ErrorCode::GeometryMismatch,
                path.string() + " is " + std::to_string(frame.width()) + "x" +
                    std::to_string(frame.height()) + ", expected " + std::to_string(geometry.width) +
                    "x" + std::to_string(geometry.height));
  }
  frame.geometry = geometry;
  return frame;
}

void store_raster(const LightningRaster &raster, const fs::path &path) {
  FileHeader header{Dtype::Int32, static_cast<std::uint32_t>(raster.geometry.width),
                    static_cast<std::uint32_t>(raster.geometry.height), "LIGHTNING",
                    raster.window_start.time_since_epoch().count()};
  write_grid_file(path, header, i32_payload(raster.counts));
}

LightningRaster load_raster(const fs::path &path, const GridGeometry &geometry) {
  auto file = read_grid_file(path);
  if (file.header.dtype != Dtype::Int32) {
    throw Error(ErrorCode::UnknownDtype, path.string() + ": rasters must be int32");
  }
  if (static_cast<int>(file.header.width) != geometry.width ||
      static_cast<int>(file.header.height) != geometry.height) {
    throw Error(ErrorCode::GeometryMismatch, path.string() + ": raster dimensions differ from grid");
  }
  return LightningRaster{geometry, Timestamp{std::chrono::seconds{file.header.timestamp}},
                         std::move(file.i32)};
}

// ---------------------------------------------------------------------------

LightningCsv parse_lightning_csv(const fs::path &path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::IoError, "cannot open " + path.string());
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorCode::MissingHeader, path.string() + " is empty");
  }
  {
    const auto fields = split(trim(line), ',');
    static constexpr std::string_view kExpected[] = {"time", "lat", "lon", "charge_ka", "height_km"};
    bool ok = fields.size() == 5;
    for (std::size_t i = 0; ok && i < 5; ++i) {
      ok = trim(fields[i]) == kExpected[i];
    }
    if (!ok) {
      throw Error(ErrorCode::MissingHeader,
                  path.string() + ": expected header time,lat,lon,charge_ka,height_km");
    }
  }

  LightningCsv result;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = trim(line);
    if (text.empty()) {
      continue;
    }
    const auto fields = split(text, ',');
    if (fields.size() != 5) {
      result.skipped.push_back({line_no, "expected 5 fields, got " + std::to_string(fields.size())});
      continue;
    }
    const auto time = parse_timestamp(trim(fields[0]));
    if (!time) {
      result.skipped.push_back({line_no, "unparseable or zone-less time '" + std::string(trim(fields[0])) + "'"});
      continue;
    }
    LightningRecord record;
    record.time = std::chrono::floor<Minutes>(*time);
    static constexpr const char *kNames[] = {"lat", "lon", "charge_ka", "height_km"};
    double *targets[] = {&record.lat, &record.lon, &record.charge_ka, &record.height_km};
    bool ok = true;
    for (int i = 0; i < 4 && ok; ++i) {
      if (!parse_double(fields[i + 1], *targets[i])) {
        result.skipped.push_back({line_no, std::string("unparseable ") + kNames[i]});
        ok = false;
      }
    }
    if (ok) {
      result.records.push_back(record);
    }
  }
  return result;
}

void write_lightning_csv(const fs::path &path, std::span<const LightningRecord> records) {
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::IoError, "cannot write " + path.string());
  }
  out << "time,lat,lon,charge_ka,height_km\n" << std::setprecision(9);
  for (const auto &r : records) {
    out << format_timestamp(r.time) << ',' << r.lat << ',' << r.lon << ',' << r.charge_ka << ','
        << r.height_km << '\n';
  }
}

// ---------------------------------------------------------------------------

fs::path sidecar_path(const fs::path &matrix_path) {
  return fs::path(matrix_path.string() + ".schema.json");
}

void store_matrix(const FeatureMatrix &matrix, const fs::path &path, const nlohmann::json &extra) {
  matrix.validate();
  FileHeader header{Dtype::Float32, static_cast<std::uint32_t>(matrix.cols()),
                    static_cast<std::uint32_t>(matrix.rows()), "FEATURES", 0};
  write_grid_file(path, header, f32_payload(matrix.values));

  nlohmann::json sidecar = extra.is_object() ? extra : nlohmann::json::object();
  sidecar["features"] = matrix.schema.names;
  if (matrix.schema.variant) {
    sidecar["variant"] = std::string(variant_name(*matrix.schema.variant));
  }
  auto keys = nlohmann::json::array();
  for (const auto &k : matrix.keys) {
    keys.push_back({k.timestamp, k.x, k.y});
  }
  sidecar["keys"] = std::move(keys);

  std::ofstream out(sidecar_path(path), std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::IoError, "cannot write " + sidecar_path(path).string());
  }
  out << sidecar.dump() << '\n';
}

nlohmann::json load_matrix_sidecar(const fs::path &path) {
  std::ifstream in(sidecar_path(path));
  if (!in) {
    throw Error(ErrorCode::MissingArtifact, "missing schema sidecar " + sidecar_path(path).string());
  }
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorCode::SchemaMismatch, sidecar_path(path).string() + ": " + e.what());
  }
}

FeatureMatrix load_matrix(const fs::path &path) {
  auto file = read_grid_file(path);
  if (file.header.dtype != Dtype::Float32) {
    throw Error(ErrorCode::UnknownDtype, path.string() + ": feature matrices must be float32");
  }
  const auto sidecar = load_matrix_sidecar(path);
  if (!sidecar.contains("features") || !sidecar["features"].is_array()) {
    throw Error(ErrorCode::SchemaMismatch, "sidecar lacks a features array");
  }
  FeatureMatrix matrix;
  matrix.schema.names = sidecar["features"].get<std::vector<std::string>>();
  if (matrix.schema.names.size() != file.header.width) {
    throw Error(ErrorCode::SchemaMismatch,
                "sidecar lists " + std::to_string(matrix.schema.names.size()) + " names for " +
                    std::to_string(file.header.width) + " columns");
  }
  if (sidecar.contains("variant")) {
    matrix.schema.variant = parse_variant(sidecar["variant"].get<std::string>());
  }
  const std::size_t rows = file.header.height;
  if (sidecar.contains("keys")) {
    const auto &keys = sidecar["keys"];
    if (keys.size() != rows) {
      throw Error(ErrorCode::SchemaMismatch, "sidecar key count differs from row count");
    }
    matrix.keys.reserve(rows);
    for (const auto &k : keys) {
      matrix.keys.push_back({k[0].get<std::int64_t>(), k[1].get<std::int32_t>(), k[2].get<std::int32_t>()});
    }
  } else {
    matrix.keys.assign(rows, RowKey{});
  }
  matrix.values = std::move(file.f32);
  return matrix;
}

} // namespace stormcast
