#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "stormcast/features.hpp"
#include "stormcast/util.hpp"

namespace stormcast {

namespace {

constexpr int kErrorOnlySizes[] = {3, 5, 7, 9};
constexpr int kExtendedSizes[] = {7, 13};

} // namespace

std::string_view variant_name(SchemaVariant v) noexcept {
  return v == SchemaVariant::ErrorOnly153 ? "error153" : "ext129";
}

std::optional<SchemaVariant> parse_variant(std::string_view name) noexcept {
  if (name == "error153" || name == "error_only_153") {
    return SchemaVariant::ErrorOnly153;
  }
  if (name == "ext129" || name == "extended_129") {
    return SchemaVariant::Extended129;
  }
  return std::nullopt;
}

std::string column_name(const FeatureColumn &column) {
  switch (column.kind) {
  case FeatureColumn::Kind::TimeHhmm: return "time_hhmm";
  case FeatureColumn::Kind::CoordX: return "coord_x";
  case FeatureColumn::Kind::CoordY: return "coord_y";
  case FeatureColumn::Kind::Convolution: break;
  }
  std::string name = column.source == FeatureSource::Error ? "err:" : "raw:";
  name += channel_name(column.channel);
  name += ':';
  name += kernel_kind_name(column.kernel.kind);
  name += std::to_string(column.kernel.size);
  return name;
}

std::vector<FeatureColumn> schema_columns(SchemaVariant variant) {
  using Kind = FeatureColumn::Kind;
  std::vector<FeatureColumn> cols;
  auto conv = [&](FeatureSource src, Channel ch, KernelSpec spec) {
    cols.push_back({Kind::Convolution, src, ch, spec});
  };

  if (variant == SchemaVariant::ErrorOnly153) {
    for (Channel ch : kChannels) {
      conv(FeatureSource::Error, ch, {});
      for (KernelKind kind : {KernelKind::Max, KernelKind::Min, KernelKind::Avg}) {
        for (int size : kErrorOnlySizes) {
          conv(FeatureSource::Error, ch, {kind, size, 0.0});
        }
      }
      for (int size : kErrorOnlySizes) {
        conv(FeatureSource::Error, ch, KernelSpec::gaussian(size));
      }
    }
    return cols;
  }

  for (FeatureSource src : {FeatureSource::Error, FeatureSource::Raw}) {
    for (Channel ch : kChannels) {
      conv(src, ch, {});
      for (KernelKind kind : {KernelKind::Max, KernelKind::Min, KernelKind::Avg}) {
        for (int size : kExtendedSizes) {
          conv(src, ch, {kind, size, 0.0});
        }
      }
    }
  }
  cols.push_back({Kind::TimeHhmm, {}, {}, {}});
  cols.push_back({Kind::CoordX, {}, {}, {}});
  cols.push_back({Kind::CoordY, {}, {}, {}});
  return cols;
}

FeatureSchema build_schema(SchemaVariant variant) {
  FeatureSchema schema;
  schema.variant = variant;
  for (const auto &col : schema_columns(variant)) {
    schema.names.push_back(column_name(col));
  }
  return schema;
}

std::string FeatureSchema::fingerprint() const {
  std::uint64_t h = fnv1a("");
  for (const auto &n : names) {
    h = fnv1a(n, h);
    h = fnv1a(std::string_view("\n", 1), h);
  }
  return to_hex(h);
}

// ---------------------------------------------------------------------------

void FeatureMatrix::validate() const {
  if (values.size() != keys.size() * schema.size()) {
    throw Error(ErrorCode::SchemaMismatch,
                "matrix payload holds " + std::to_string(values.size()) + " values for " +
                    std::to_string(keys.size()) + " rows x " + std::to_string(schema.size()) +
                    " columns");
  }
}

void FeatureMatrix::append(const FeatureMatrix &other) {
  if (other.schema.names != schema.names) {
    throw Error(ErrorCode::SchemaMismatch, "cannot append rows with a different schema");
  }
  values.insert(values.end(), other.values.begin(), other.values.end());
  keys.insert(keys.end(), other.keys.begin(), other.keys.end());
}

FeatureMatrix FeatureMatrix::subset(std::span<const std::size_t> indices) const {
  FeatureMatrix out;
  out.schema = schema;
  out.values.reserve(indices.size() * cols());
  out.keys.reserve(indices.size());
  for (auto i : indices) {
    const auto r = row(i);
    out.values.insert(out.values.end(), r.begin(), r.end());
    out.keys.push_back(keys[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------

FeatureMatrix assemble(std::span<const GridFrame> error_frames, std::span<const GridFrame> raw_frames,
                       SchemaVariant variant, std::span<const TileIndex> tiles) {
  const bool needs_raw = variant == SchemaVariant::Extended129;
  if (error_frames.size() != kChannelCount) {
    throw Error(ErrorCode::SchemaFrameMismatch,
                "expected 9 error frames, got " + std::to_string(error_frames.size()));
  }
  if (needs_raw != !raw_frames.empty() || (needs_raw && raw_frames.size() != kChannelCount)) {
    throw Error(ErrorCode::SchemaFrameMismatch,
                std::string("schema ") + std::string(variant_name(variant)) +
                    (needs_raw ? " needs 9 raw frames" : " takes no raw frames"));
  }
  const auto &ref = error_frames.front();
  for (std::size_t c = 0; c < kChannelCount; ++c) {
    const auto &e = error_frames[c];
    if (e.geometry != ref.geometry || e.timestamp != ref.timestamp) {
      throw Error(ErrorCode::SchemaFrameMismatch, "error frames differ in geometry or timestamp");
    }
    if (needs_raw && (raw_frames[c].geometry != ref.geometry || raw_frames[c].timestamp != ref.timestamp)) {
      throw Error(ErrorCode::SchemaFrameMismatch, "raw frames differ from error frames in geometry or timestamp");
    }
  }
  for (const auto &t : tiles) {
    if (t.x < 0 || t.y < 0 || t.x >= ref.width() || t.y >= ref.height()) {
      throw Error(ErrorCode::OutOfBounds, "tile (" + std::to_string(t.x) + ", " +
                                              std::to_string(t.y) + ") outside the grid");
    }
  }

  const auto columns = schema_columns(variant);
  FeatureMatrix m;
  m.schema = build_schema(variant);
  const std::size_t ncols = columns.size();
  m.values.assign(tiles.size() * ncols, 0.0f);
  m.keys.reserve(tiles.size());
  const std::int64_t ts = ref.timestamp.time_since_epoch().count();
  for (const auto &t : tiles) {
    m.keys.push_back({ts, t.x, t.y});
  }
  if (tiles.empty()) {
    return m;
  }

  const float hhmm = static_cast<float>(time_hhmm(ref.timestamp));
  for (std::size_t c = 0; c < ncols; ++c) {
    const auto &col = columns[c];
    if (col.kind != FeatureColumn::Kind::Convolution) {
      for (std::size_t r = 0; r < tiles.size(); ++r) {
        float v = hhmm;
        if (col.kind == FeatureColumn::Kind::CoordX) v = static_cast<float>(tiles[r].x);
        if (col.kind == FeatureColumn::Kind::CoordY) v = static_cast<float>(tiles[r].y);
        m.values[r * ncols + c] = v;
      }
      continue;
    }
    const auto &src = col.source == FeatureSource::Error
                          ? error_frames[static_cast<std::size_t>(col.channel)]
                          : raw_frames[static_cast<std::size_t>(col.channel)];
    const GridFrame filtered = conv_filter(src, col.kernel);
    for (std::size_t r = 0; r < tiles.size(); ++r) {
      m.values[r * ncols + c] = filtered.at(tiles[r].x, tiles[r].y);
    }
  }
  return m;
}

NormalizationStats compute_stats(const FeatureMatrix &training) {
  training.validate();
  const std::size_t cols = training.cols();
  NormalizationStats stats{std::vector<float>(cols, 0.0f), std::vector<float>(cols, 0.0f)};
  if (training.rows() == 0) {
    return stats;
  }
  const auto first = training.row(0);
  std::copy(first.begin(), first.end(), stats.min.begin());
  std::copy(first.begin(), first.end(), stats.max.begin());
  for (std::size_t r = 1; r < training.rows(); ++r) {
    const auto row = training.row(r);
    for (std::size_t c = 0; c < cols; ++c) {
      stats.min[c] = std::min(stats.min[c], row[c]);
      stats.max[c] = std::max(stats.max[c], row[c]);
    }
  }
  return stats;
}

FeatureMatrix normalize(const FeatureMatrix &matrix, const NormalizationStats &stats) {
  matrix.validate();
  if (stats.min.size() != matrix.cols() || stats.max.size() != matrix.cols()) {
    throw Error(ErrorCode::SchemaMismatch, "normalisation stats do not match the schema width");
  }
  FeatureMatrix out = matrix;
  const std::size_t cols = matrix.cols();
  for (std::size_t r = 0; r < matrix.rows(); ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      float &v = out.values[r * cols + c];
      const double range = static_cast<double>(stats.max[c]) - stats.min[c];
      if (!(range > 0.0)) {
        v = 0.0f;
      } else {
        v = static_cast<float>(std::clamp((v - static_cast<double>(stats.min[c])) / range, 0.0, 1.0));
      }
    }
  }
  return out;
}

} // namespace stormcast
