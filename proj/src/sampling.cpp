#include "stormcast/sampling.hpp"

#include <algorithm>
#include <iostream>

#include "stormcast/rng.hpp"

namespace stormcast {

void validate_offset(Minutes offset) {
  if (offset.count() < 0 || offset > kMaxOffset || offset.count() % 15 != 0) {
    throw Error(ErrorCode::InvalidOffset,
                "offset " + std::to_string(offset.count()) +
                    " min must be a multiple of 15 min between 0:00 and 5:00");
  }
}

LabelFrame label_tiles(const LightningRaster &raster) {
  LabelFrame out{raster.geometry, raster.window_start, {}};
  out.labels.resize(raster.counts.size());
  std::transform(raster.counts.begin(), raster.counts.end(), out.labels.begin(),
                 [](std::int32_t c) { return static_cast<std::uint8_t>(c >= 1 ? 1 : 0); });
  return out;
}

LabelFrame label_tiles(const RasterSeries &rasters, Timestamp t0, Minutes offset) {
  validate_offset(offset);
  const Timestamp window = t0 + offset;
  const auto it = rasters.find(window);
  if (it == rasters.end()) {
    throw Error(ErrorCode::MissingRaster, "no lightning raster for window " + format_timestamp(window));
  }
  return label_tiles(it->second);
}

BalancedSelection balance_per_image(const LabelFrame &labels, std::uint64_t seed) {
  BalancedSelection sel;
  std::vector<TileIndex> negatives;
  const int w = labels.geometry.width;
  for (int y = 0; y < labels.geometry.height; ++y) {
    for (int x = 0; x < w; ++x) {
      (labels.at(x, y) ? sel.tiles : negatives).push_back({x, y});
    }
  }
  sel.positives = sel.tiles.size();
  if (sel.positives == 0) {
    return sel;
  }
  std::size_t take = sel.positives;
  if (take > negatives.size()) {
    sel.degenerate = true;
    take = negatives.size();
    std::cerr << "warning: frame " << format_timestamp(labels.window_start) << " has "
              << sel.positives << " positive and only " << negatives.size()
              << " negative tiles; keeping all tiles\n";
  }
  // partial Fisher-Yates: the first `take` entries become the sample
  Rng rng(seed);
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(negatives.size() - i));
    std::swap(negatives[i], negatives[j]);
  }
  sel.tiles.insert(sel.tiles.end(), negatives.begin(), negatives.begin() + static_cast<std::ptrdiff_t>(take));
  sel.negatives = take;
  return sel;
}

// ---------------------------------------------------------------------------

std::optional<std::size_t> FoldSpec::fold_of(Timestamp t) const noexcept {
  for (std::size_t i = 0; i < folds.size(); ++i) {
    if (t >= folds[i].start && t <= folds[i].end) {
      return i;
    }
  }
  return std::nullopt;
}

void FoldSpec::validate() const {
  if (folds.empty()) {
    throw Error(ErrorCode::InsufficientData, "fold spec has no folds");
  }
  for (std::size_t i = 0; i < folds.size(); ++i) {
    if (folds[i].end < folds[i].start) {
      throw Error(ErrorCode::InsufficientData, "fold " + std::to_string(i) + " ends before it starts");
    }
    if (i > 0 && folds[i].start - folds[i - 1].end < margin) {
      throw Error(ErrorCode::InsufficientData,
                  "gap between folds " + std::to_string(i - 1) + " and " + std::to_string(i) +
                      " is below the margin");
    }
  }
}

nlohmann::json to_json(const FoldSpec &spec) {
  auto folds = nlohmann::json::array();
  for (const auto &f : spec.folds) {
    folds.push_back({{"start", format_timestamp(f.start)}, {"end", format_timestamp(f.end)}});
  }
  return {{"folds", folds}, {"margin_minutes", spec.margin.count()}, {"seed", spec.seed}};
}

FoldSpec fold_spec_from_json(const nlohmann::json &j) {
  FoldSpec spec;
  try {
    spec.margin = Minutes{j.at("margin_minutes").get<std::int64_t>()};
    spec.seed = j.value("seed", std::uint64_t{0});
    for (const auto &f : j.at("folds")) {
      const auto start = parse_timestamp(f.at("start").get<std::string>());
      const auto end = parse_timestamp(f.at("end").get<std::string>());
      if (!start || !end) {
        throw Error(ErrorCode::BadConfig, "fold timestamps must be ISO-8601 UTC");
      }
      spec.folds.push_back({*start, *end});
    }
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorCode::BadConfig, std::string("fold spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

FoldSpec make_folds(std::span<const Timestamp> available, std::size_t k, Minutes margin,
                    std::uint64_t seed) {
  if (k < 2) {
    throw Error(ErrorCode::InvalidArgument, "need at least 2 folds");
  }
  if (margin.count() < 0) {
    throw Error(ErrorCode::InvalidArgument, "margin must be non-negative");
  }
  std::vector<Timestamp> ts(available.begin(), available.end());
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  if (ts.size() < k) {
    throw Error(ErrorCode::InsufficientData,
                std::to_string(ts.size()) + " timestamps cannot fill " + std::to_string(k) + " folds");
  }

  // contiguous blocks, the first (n % k) blocks one frame larger
  std::vector<std::size_t> begin(k + 1);
  const std::size_t base = ts.size() / k;
  const std::size_t extra = ts.size() % k;
  for (std::size_t i = 0; i < k; ++i) {
    begin[i + 1] = begin[i] + base + (i < extra ? 1 : 0);
  }

  FoldSpec spec;
  spec.margin = margin;
  spec.seed = seed;
  // frames within margin/2 of the midpoint between adjacent blocks are dropped
  const auto half = std::chrono::duration_cast<std::chrono::seconds>(margin) / 2;
  auto midpoint = [&](std::size_t b) { return ts[b - 1] + (ts[b] - ts[b - 1]) / 2; };
  for (std::size_t i = 0; i < k; ++i) {
    const Timestamp lo = i > 0 ? midpoint(begin[i]) + half : Timestamp::min();
    const Timestamp hi = i + 1 < k ? midpoint(begin[i + 1]) - half : Timestamp::max();
    std::optional<Timestamp> first, last;
    for (std::size_t j = begin[i]; j < begin[i + 1]; ++j) {
      if (ts[j] >= lo && ts[j] <= hi) {
        if (!first) first = ts[j];
        last = ts[j];
      }
    }
    if (!first) {
      throw Error(ErrorCode::InsufficientData,
                  "fold " + std::to_string(i) + " is empty after removing the margin");
    }
    spec.folds.push_back({*first, *last});
  }
  spec.validate();
  return spec;
}

// ---------------------------------------------------------------------------

std::vector<std::size_t> LabeledDataset::rows_in_fold(std::int32_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < folds.size(); ++i) {
    if (folds[i] == fold) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> LabeledDataset::rows_outside_fold(std::int32_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < folds.size(); ++i) {
    if (folds[i] != fold && folds[i] >= 0) out.push_back(i);
  }
  return out;
}

void LabeledDataset::validate() const {
  features.validate();
  if (labels.size() != features.rows() || folds.size() != features.rows()) {
    throw Error(ErrorCode::SchemaMismatch, "labels / fold ids do not match the feature rows");
  }
  for (auto l : labels) {
    if (l > 1) {
      throw Error(ErrorCode::InvalidArgument, "labels must be 0 or 1");
    }
  }
}

} // namespace stormcast
