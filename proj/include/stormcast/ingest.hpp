#pragma once

// Binary grid files
// -----------------
// Every grid artifact (satellite frame, error frame, lightning raster, label
// frame, feature matrix) uses the same 44 byte little-endian header followed
// by a row-major payload:
//
//   offset  size  field
//        0     8  magic "STRMCST1"
//        8     4  dtype (1 = float32, 2 = int32)
//       12     4  width  (uint32)
//       16     4  height (uint32)
//       20    16  tag, zero padded
//       36     8  timestamp, unix seconds (int64)
//       44     -  payload, width * height * 4 bytes, row 0 first
//
// Feature matrices store columns as width and rows as height, with the ordered
// feature names in `<path>.schema.json`.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stormcast/features.hpp"
#include "stormcast/raster.hpp"

namespace stormcast {

inline constexpr char kFileMagic[8] = {'S', 'T', 'R', 'M', 'C', 'S', 'T', '1'};
inline constexpr std::size_t kHeaderSize = 44;

enum class Dtype : std::uint32_t { Float32 = 1, Int32 = 2 };

struct FileHeader {
  Dtype dtype = Dtype::Float32;
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::string tag;
  std::int64_t timestamp = 0;
};

/// Raw grid file contents; exactly one of the payload vectors is filled.
struct GridFile {
  FileHeader header;
  std::vector<float> f32;
  std::vector<std::int32_t> i32;
};

void write_grid_file(const std::filesystem::path &path, const FileHeader &header,
                     std::span<const std::uint8_t> payload);
/// Throws BadMagic, UnknownDtype, TruncatedPayload, IoError.
GridFile read_grid_file(const std::filesystem::path &path);

void store_frame(const GridFrame &frame, const std::filesystem::path &path);
/// The file carries only the grid dimensions; the returned geometry is the
/// tile index space unless the caller supplies the run geometry.
GridFrame load_frame(const std::filesystem::path &path);
GridFrame load_frame(const std::filesystem::path &path, const GridGeometry &geometry);

void store_raster(const LightningRaster &raster, const std::filesystem::path &path);
LightningRaster load_raster(const std::filesystem::path &path, const GridGeometry &geometry);

struct SkippedRow {
  std::size_t line = 0; // 1-based, header is line 1
  std::string reason;
};

struct LightningCsv {
  std::vector<LightningRecord> records;
  std::vector<SkippedRow> skipped;
};

/// Header must be `time,lat,lon,charge_ka,height_km`. Malformed rows are
/// skipped and reported; times without a zone designator count as malformed.
/// Throws MissingHeader, IoError.
LightningCsv parse_lightning_csv(const std::filesystem::path &path);
void write_lightning_csv(const std::filesystem::path &path,
                         std::span<const LightningRecord> records);

/// Writes the matrix file plus its `.schema.json` sidecar. `extra` entries are
/// merged into the sidecar (e.g. the producing config hash).
void store_matrix(const FeatureMatrix &matrix, const std::filesystem::path &path,
                  const nlohmann::json &extra = nlohmann::json::object());
/// Throws SchemaMismatch if the sidecar disagrees with the column count.
FeatureMatrix load_matrix(const std::filesystem::path &path);
nlohmann::json load_matrix_sidecar(const std::filesystem::path &path);

std::filesystem::path sidecar_path(const std::filesystem::path &matrix_path);

} // namespace stormcast
