#include "stormcast/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <set>

#include "stormcast/ingest.hpp"
#include "stormcast/rng.hpp"
#include "stormcast/sampling.hpp"
#include "stormcast/util.hpp"

namespace stormcast {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

namespace {

json flow_to_json(const FlowParams &p) {
  return {{"tau", p.tau},
          {"lambda", p.lambda},
          {"theta", p.theta},
          {"epsilon", p.epsilon},
          {"outer_iterations", p.outer_iterations},
          {"inner_iterations", p.inner_iterations},
          {"gamma", p.gamma},
          {"nscales", p.nscales},
          {"scale_step", p.scale_step},
          {"warps", p.warps},
          {"median_filtering", p.median_filtering}};
}

FlowParams flow_from_json(const json &j) {
  FlowParams p;
  p.tau = j.value("tau", p.tau);
  p.lambda = j.value("lambda", p.lambda);
  p.theta = j.value("theta", p.theta);
  p.epsilon = j.value("epsilon", p.epsilon);
  p.outer_iterations = j.value("outer_iterations", p.outer_iterations);
  p.inner_iterations = j.value("inner_iterations", p.inner_iterations);
  p.gamma = j.value("gamma", p.gamma);
  p.nscales = j.value("nscales", p.nscales);
  p.scale_step = j.value("scale_step", p.scale_step);
  p.warps = j.value("warps", p.warps);
  p.median_filtering = j.value("median_filtering", p.median_filtering);
  p.validate();
  return p;
}

json geometry_to_json(const GridGeometry &g) {
  return {{"width", g.width},     {"height", g.height},   {"lat_min", g.lat_min},
          {"lat_max", g.lat_max}, {"lon_min", g.lon_min}, {"lon_max", g.lon_max}};
}

GridGeometry geometry_from_json(const json &j) {
  GridGeometry g;
  g.width = j.at("width").get<int>();
  g.height = j.at("height").get<int>();
  g.lat_min = j.at("lat_min").get<double>();
  g.lat_max = j.at("lat_max").get<double>();
  g.lon_min = j.at("lon_min").get<double>();
  g.lon_max = j.at("lon_max").get<double>();
  g.validate();
  return g;
}

Minutes offset_from_json(const json &j) {
  if (j.is_number_integer()) return Minutes{j.get<int>()};
  const auto parsed = parse_offset(j.get<std::string>());
  if (!parsed) {
    throw Error(ErrorCode::InvalidOffset, "offset " + j.dump() + " is not of the form h:mm");
  }
  return *parsed;
}

/// The scene seed follows the experiment seed unless the scene pins its own.
SceneConfig effective_scene(const ExperimentConfig &c) { return c.data.scene; }

} // namespace

void ExperimentConfig::validate() const {
  validate_offset(offset);
  if (folds < 2) throw Error(ErrorCode::BadConfig, "need at least 2 folds");
  if (margin.count() < 0) throw Error(ErrorCode::BadConfig, "fold margin must be >= 0");
  model.validate();
  flow.validate();
  if (data.kind == DataSource::Kind::Synth) {
    data.scene.validate();
  } else {
    data.geometry.validate();
    if (data.frames_dir.empty() || data.lightning_csv.empty()) {
      throw Error(ErrorCode::BadConfig, "file input needs frames_dir and lightning_csv");
    }
  }
  if (!(projection.positives > 0.0) || !(projection.negatives > 0.0) ||
      !(projection.target_precision > 0.0 && projection.target_precision <= 1.0)) {
    throw Error(ErrorCode::BadConfig, "projection needs positives, negatives > 0 and a precision in (0, 1]");
  }
  if (out.empty()) throw Error(ErrorCode::BadConfig, "output directory is empty");
}

json to_json(const ExperimentConfig &c) {
  json data;
  if (c.data.kind == DataSource::Kind::Synth) {
    data = {{"source", "synth"}, {"scene", to_json(c.data.scene)}};
  } else {
    data = {{"source", "files"},
            {"frames_dir", c.data.frames_dir.string()},
            {"lightning_csv", c.data.lightning_csv.string()},
            {"geometry", geometry_to_json(c.data.geometry)}};
  }
  json flow = flow_to_json(c.flow);
  flow["shared_channel"] = c.flow_channel ? json(std::string(channel_name(*c.flow_channel))) : json(nullptr);
  return {{"data", data},
          {"schema", variant_name(c.schema)},
          {"offset", format_offset(c.offset)},
          {"folds", {{"k", c.folds}, {"margin_minutes", c.margin.count()}}},
          {"model", to_json(c.model)},
          {"flow", flow},
          {"seed", c.seed},
          {"paper_mode", c.paper_mode},
          {"projection",
           {{"positives", c.projection.positives},
            {"negatives", c.projection.negatives},
            {"target_precision", c.projection.target_precision}}},
          {"out", c.out.string()}};
}

ExperimentConfig experiment_config_from_json(const json &j) {
  ExperimentConfig c;
  try {
    c.seed = j.value("seed", c.seed);
    if (j.contains("data")) {
      const auto &d = j.at("data");
      const std::string source = d.value("source", "synth");
      if (source == "synth") {
        c.data.kind = DataSource::Kind::Synth;
        json scene = d.value("scene", json::object());
        if (!scene.contains("seed")) scene["seed"] = c.seed;
        c.data.scene = scene_config_from_json(scene);
      } else if (source == "files") {
        c.data.kind = DataSource::Kind::Files;
        c.data.frames_dir = d.at("frames_dir").get<std::string>();
        c.data.lightning_csv = d.at("lightning_csv").get<std::string>();
        c.data.geometry = geometry_from_json(d.at("geometry"));
      } else {
        throw Error(ErrorCode::BadConfig, "data.source must be synth or files");
      }
    } else {
      c.data.scene.seed = c.seed;
    }
    if (j.contains("schema")) {
      const auto v = parse_variant(j.at("schema").get<std::string>());
      if (!v) throw Error(ErrorCode::BadConfig, "unknown schema " + j.at("schema").dump());
      c.schema = *v;
    }
    if (j.contains("offset")) c.offset = offset_from_json(j.at("offset"));
    if (j.contains("folds")) {
      c.folds = j.at("folds").value("k", c.folds);
      c.margin = Minutes{j.at("folds").value("margin_minutes", c.margin.count())};
    }
    if (j.contains("model")) {
      c.model = train_config_from_json(j.at("model"));
    }
    if (j.contains("flow")) {
      const auto &f = j.at("flow");
      c.flow = flow_from_json(f);
      if (f.contains("shared_channel") && !f.at("shared_channel").is_null()) {
        const auto ch = parse_channel(f.at("shared_channel").get<std::string>());
        if (!ch) throw Error(ErrorCode::BadConfig, "unknown flow channel " + f.at("shared_channel").dump());
        c.flow_channel = *ch;
      }
    }
    c.paper_mode = j.value("paper_mode", c.paper_mode);
    if (j.contains("projection")) {
      const auto &p = j.at("projection");
      c.projection.positives = p.value("positives", c.projection.positives);
      c.projection.negatives = p.value("negatives", c.projection.negatives);
      c.projection.target_precision = p.value("target_precision", c.projection.target_precision);
    }
    if (j.contains("out")) c.out = j.at("out").get<std::string>();
  } catch (const json::exception &e) {
    throw Error(ErrorCode::BadConfig, std::string("experiment config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const fs::path &path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingArtifact, "cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception &e) {
    throw Error(ErrorCode::BadConfig, path.string() + ": " + e.what());
  }
  return experiment_config_from_json(j);
}

void apply_override(json &doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw Error(ErrorCode::BadConfig, "override must look like key.path=value: " + std::string(assignment));
  }
  const std::string key(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  json *node = &doc;
  std::size_t begin = 0;
  while (true) {
    const auto dot = key.find('.', begin);
    const std::string part = key.substr(begin, dot == std::string::npos ? std::string::npos : dot - begin);
    if (part.empty()) throw Error(ErrorCode::BadConfig, "empty key segment in " + key);
    if (!node->is_object()) *node = json::object();
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    begin = dot + 1;
  }
}

// ---------------------------------------------------------------------------
// Hashes and layout
// ---------------------------------------------------------------------------

std::string_view stage_name(Stage stage) noexcept {
  switch (stage) {
  case Stage::Ingest: return "ingest";
  case Stage::Flow: return "flow";
  case Stage::Featurize: return "featurize";
  case Stage::Split: return "split";
  case Stage::Train: return "train";
  case Stage::Evaluate: return "evaluate";
  }
  return "?";
}

std::string stage_hash(const ExperimentConfig &config, Stage stage) {
  const json full = to_json(config);
  json parts = json::object();
  parts["data"] = full["data"];
  if (stage >= Stage::Flow) parts["flow"] = full["flow"];
  if (stage >= Stage::Featurize) {
    parts["schema"] = full["schema"];
    parts["offset"] = full["offset"];
    parts["seed"] = full["seed"];
  }
  if (stage >= Stage::Split) parts["folds"] = full["folds"];
  if (stage >= Stage::Train) {
    json model = full["model"];
    model.erase("parallel_jobs"); // scheduling only
    parts["model"] = model;
    parts["paper_mode"] = full["paper_mode"];
  }
  if (stage >= Stage::Evaluate) parts["projection"] = full["projection"];
  return to_hex(fnv1a(parts.dump()));
}

std::string compact_timestamp(Timestamp t) {
  std::string s = format_timestamp(t); // YYYY-MM-DDTHH:MM:SSZ
  std::erase(s, '-');
  std::erase(s, ':');
  return s;
}

RunPaths::RunPaths(const ExperimentConfig &config) : cache(config.out), results(config.out) {}
RunPaths::RunPaths(fs::path cache_dir, fs::path results_dir)
    : cache(std::move(cache_dir)), results(std::move(results_dir)) {}

RunLock::RunLock(const fs::path &dir) : path_(dir / ".stormcast.lock") {
  fs::create_directories(dir);
  std::FILE *f = std::fopen(path_.c_str(), "wx");
  if (!f) {
    throw Error(ErrorCode::Locked, "output directory " + dir.string() +
                                       " is in use (remove " + path_.string() + " if no run is active)");
  }
  std::fclose(f);
}

RunLock::~RunLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

namespace {

fs::path manifest_path(const fs::path &dir) { return dir / "manifest.json"; }

void write_json(const fs::path &path, const json &j) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json read_json(const fs::path &path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingArtifact, "expected artifact " + path.string() + " is missing");
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::exception &e) {
    throw Error(ErrorCode::MissingArtifact, path.string() + " is unreadable: " + e.what());
  }
}

/// Verifies the hash an upstream artifact was written with.
void expect_hash(const json &artifact, const fs::path &where, const ExperimentConfig &config, Stage producer) {
  const std::string want = stage_hash(config, producer);
  const std::string got = artifact.value("config_hash", "");
  if (got != want) {
    throw Error(ErrorCode::ConfigHashMismatch,
                where.string() + " was written with config hash " + (got.empty() ? "<none>" : got) +
                    " but the current configuration gives " + want + "; rerun the " +
                    std::string(stage_name(producer)) + " stage");
  }
}

std::vector<Timestamp> timestamps_of(const json &manifest) {
  std::vector<Timestamp> out;
  for (const auto &s : manifest.at("timestamps")) {
    const auto t = parse_timestamp(s.get<std::string>());
    if (!t) throw Error(ErrorCode::MissingArtifact, "bad timestamp in manifest");
    out.push_back(*t);
  }
  return out;
}

GridGeometry run_geometry(const ExperimentConfig &c) {
  return c.data.kind == DataSource::Kind::Synth ? c.data.scene.geometry : c.data.geometry;
}

using FrameSet = std::array<GridFrame, kChannelCount>;

FrameSet load_frame_set(const fs::path &dir, const GridGeometry &g) {
  FrameSet set;
  for (std::size_t c = 0; c < kChannelCount; ++c) {
    const auto path = dir / (std::string(channel_name(kChannels[c])) + ".grid");
    if (!fs::exists(path)) throw Error(ErrorCode::MissingArtifact, "expected frame " + path.string());
    set[c] = load_frame(path, g);
  }
  return set;
}

void store_frame_set(const FrameSet &set, const fs::path &dir) {
  fs::create_directories(dir);
  for (std::size_t c = 0; c < kChannelCount; ++c) {
    store_frame(set[c], dir / (std::string(channel_name(kChannels[c])) + ".grid"));
  }
}

json timestamps_json(const std::vector<Timestamp> &ts) {
  json a = json::array();
  for (auto t : ts) a.push_back(format_timestamp(t));
  return a;
}

std::uint8_t to_label(float p) { return p >= 0.5f ? 1 : 0; }

} // namespace

void write_resolved_config(const ExperimentConfig &config, const RunPaths &paths) {
  write_json(paths.results / "config.resolved.json", to_json(config));
}

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

StageSummary run_ingest(const ExperimentConfig &config, const RunPaths &paths) {
  config.validate();
  const GridGeometry g = run_geometry(config);
  std::vector<Timestamp> stamps;
  std::vector<LightningRecord> records;
  std::string detail;
  fs::create_directories(paths.frames());

  if (config.data.kind == DataSource::Kind::Synth) {
    const Scene scene = generate_scene(effective_scene(config));
    for (std::size_t i = 0; i < scene.timestamps.size(); ++i) {
      store_frame_set(scene.frames[i], paths.frames() / compact_timestamp(scene.timestamps[i]));
    }
    stamps = scene.timestamps;
    records = scene.lightning;
    detail = std::to_string(stamps.size()) + " synthetic frames, " + std::to_string(records.size()) + " strikes";
  } else {
    std::map<Timestamp, fs::path> dirs;
    if (!fs::is_directory(config.data.frames_dir)) {
      throw Error(ErrorCode::MissingArtifact, "frames directory " + config.data.frames_dir.string() + " not found");
    }
    for (const auto &entry : fs::directory_iterator(config.data.frames_dir)) {
      if (!entry.is_directory()) continue;
      const FrameSet set = load_frame_set(entry.path(), g);
      const Timestamp t = set[0].timestamp;
      for (const auto &f : set) {
        if (f.timestamp != t) {
          throw Error(ErrorCode::TimestampMismatch, "channels in " + entry.path().string() + " disagree on time");
        }
      }
      if (dirs.count(t)) throw Error(ErrorCode::TimestampMismatch, "two frame sets for " + format_timestamp(t));
      dirs[t] = entry.path();
      store_frame_set(set, paths.frames() / compact_timestamp(t));
    }
    for (const auto &[t, _] : dirs) stamps.push_back(t);
    auto csv = parse_lightning_csv(config.data.lightning_csv);
    for (const auto &s : csv.skipped) {
      std::cerr << "warning: " << config.data.lightning_csv.string() << ":" << s.line << ": " << s.reason << '\n';
    }
    records = std::move(csv.records);
    detail = std::to_string(stamps.size()) + " frame sets, " + std::to_string(records.size()) + " strikes, " +
             std::to_string(csv.skipped.size()) + " rows skipped";
  }
  if (stamps.empty()) throw Error(ErrorCode::InsufficientData, "no frames to ingest");
  write_lightning_csv(paths.lightning_csv(), records);

  // one raster per frame window; records are bucketed once
  std::map<Timestamp, std::vector<LightningRecord>> by_window;
  for (const auto &r : records) by_window[window_index(r.time)].push_back(r);
  fs::create_directories(paths.rasters());
  std::size_t dropped = 0;
  for (auto t : stamps) {
    const auto it = by_window.find(t);
    const std::vector<LightningRecord> none;
    const auto res = rasterize(it == by_window.end() ? none : it->second, g, t);
    dropped += res.dropped;
    store_raster(res.raster, paths.rasters() / (compact_timestamp(t) + ".grid"));
  }
  if (dropped > 0) detail += ", " + std::to_string(dropped) + " outside the grid";

  const std::string hash = stage_hash(config, Stage::Ingest);
  write_json(manifest_path(paths.frames()), {{"stage", "ingest"},
                                             {"config_hash", hash},
                                             {"geometry", geometry_to_json(g)},
                                             {"timestamps", timestamps_json(stamps)}});
  return {Stage::Ingest, hash, detail};
}

StageSummary run_flow(const ExperimentConfig &config, const RunPaths &paths) {
  config.validate();
  const auto manifest = read_json(manifest_path(paths.frames()));
  expect_hash(manifest, manifest_path(paths.frames()), config, Stage::Ingest);
  const GridGeometry g = run_geometry(config);
  const auto stamps = timestamps_of(manifest);

  std::vector<FrameSet> frames(stamps.size());
  for (std::size_t i = 0; i < stamps.size(); ++i) {
    frames[i] = load_frame_set(paths.frames() / compact_timestamp(stamps[i]), g);
  }
  std::vector<std::size_t> targets;
  for (std::size_t i = 2; i < stamps.size(); ++i) {
    if (stamps[i] - stamps[i - 1] == kWindowLength && stamps[i - 1] - stamps[i - 2] == kWindowLength) {
      targets.push_back(i);
    }
  }
  fs::create_directories(paths.errors());
  parallel_for(targets.size(), config.model.parallel_jobs, [&](std::size_t k) {
    const std::size_t i = targets[k];
    FrameSet errors;
    std::optional<FlowField> shared;
    if (config.flow_channel) {
      const auto c = static_cast<std::size_t>(*config.flow_channel);
      shared = compute_flow(frames[i - 2][c], frames[i - 1][c], config.flow);
    }
    for (std::size_t c = 0; c < kChannelCount; ++c) {
      const GridFrame predicted = shared ? predict_next_with(frames[i - 1][c], *shared)
                                         : predict_next(frames[i - 2][c], frames[i - 1][c], config.flow);
      errors[c] = error_field(frames[i][c], predicted);
    }
    store_frame_set(errors, paths.errors() / compact_timestamp(stamps[i]));
  });
  std::vector<Timestamp> out;
  for (auto i : targets) out.push_back(stamps[i]);
  const std::string hash = stage_hash(config, Stage::Flow);
  write_json(manifest_path(paths.errors()), {{"stage", "flow"}, {"config_hash", hash}, {"timestamps", timestamps_json(out)}});
  return {Stage::Flow, hash,
          std::to_string(out.size()) + " error frame sets (" +
              std::to_string(stamps.size() - out.size()) + " frames lack two predecessors)"};
}

StageSummary run_featurize(const ExperimentConfig &config, const RunPaths &paths) {
  config.validate();
  const auto frames_manifest = read_json(manifest_path(paths.frames()));
  expect_hash(frames_manifest, manifest_path(paths.frames()), config, Stage::Ingest);
  const auto error_manifest = read_json(manifest_path(paths.errors()));
  expect_hash(error_manifest, manifest_path(paths.errors()), config, Stage::Flow);
  const GridGeometry g = run_geometry(config);
  const auto all_stamps = timestamps_of(frames_manifest);
  const auto error_stamps = timestamps_of(error_manifest);

  RasterSeries rasters;
  for (auto t : all_stamps) {
    rasters[t] = load_raster(paths.rasters() / (compact_timestamp(t) + ".grid"), g);
  }
  const bool raw = config.schema == SchemaVariant::Extended129;

  struct FramePart {
    FeatureMatrix x;
    std::vector<std::uint8_t> y;
    bool skipped = false;
    bool degenerate = false;
  };
  std::vector<FramePart> parts(error_stamps.size());
  parallel_for(error_stamps.size(), config.model.parallel_jobs, [&](std::size_t k) {
    const Timestamp t = error_stamps[k];
    auto &part = parts[k];
    LabelFrame labels;
    try {
      labels = label_tiles(rasters, t, config.offset);
    } catch (const Error &e) {
      if (e.code() != ErrorCode::MissingRaster) throw;
      part.skipped = true;
      return;
    }
    const auto frame_index =
        static_cast<std::uint64_t>(std::lower_bound(all_stamps.begin(), all_stamps.end(), t) - all_stamps.begin());
    const auto sel = balance_per_image(labels, frame_seed(config.seed, frame_index));
    part.degenerate = sel.degenerate;
    if (sel.tiles.empty()) return;
    const FrameSet errors = load_frame_set(paths.errors() / compact_timestamp(t), g);
    FrameSet raws;
    if (raw) raws = load_frame_set(paths.frames() / compact_timestamp(t), g);
    part.x = assemble(errors, raw ? std::span<const GridFrame>(raws) : std::span<const GridFrame>(), config.schema,
                      sel.tiles);
    for (const auto &tile : sel.tiles) part.y.push_back(labels.at(tile.x, tile.y));
  });

  FeatureMatrix dataset;
  dataset.schema = build_schema(config.schema);
  std::vector<std::uint8_t> labels;
  std::size_t skipped = 0;
  std::size_t degenerate = 0;
  std::size_t used = 0;
  for (auto &p : parts) {
    skipped += p.skipped ? 1 : 0;
    degenerate += p.degenerate ? 1 : 0;
    if (p.y.empty()) continue;
    ++used;
    dataset.append(p.x);
    labels.insert(labels.end(), p.y.begin(), p.y.end());
  }
  if (dataset.rows() == 0) {
    throw Error(ErrorCode::InsufficientData, "no frame produced any lightning sample at offset " +
                                                 format_offset(config.offset));
  }
  const std::string hash = stage_hash(config, Stage::Featurize);
  fs::create_directories(paths.results);
  store_matrix(dataset, paths.dataset(),
               {{"config_hash", hash},
                {"labels", labels},
                {"offset", format_offset(config.offset)},
                {"rng", Rng::kName},
                {"frames_used", used},
                {"frames_without_label_window", skipped},
                {"degenerate_frames", degenerate}});
  return {Stage::Featurize, hash,
          std::to_string(dataset.rows()) + " rows x " + std::to_string(dataset.cols()) + " features from " +
              std::to_string(used) + " frames"};
}

namespace {

struct LoadedDataset {
  FeatureMatrix x;
  std::vector<std::uint8_t> y;
};

LoadedDataset load_dataset(const ExperimentConfig &config, const RunPaths &paths) {
  if (!fs::exists(paths.dataset())) {
    throw Error(ErrorCode::MissingArtifact, "expected feature matrix " + paths.dataset().string());
  }
  const json side = load_matrix_sidecar(paths.dataset());
  expect_hash(side, paths.dataset(), config, Stage::Featurize);
  LoadedDataset d{load_matrix(paths.dataset()), side.at("labels").get<std::vector<std::uint8_t>>()};
  if (d.y.size() != d.x.rows()) throw Error(ErrorCode::SchemaMismatch, "label count differs from the matrix rows");
  return d;
}

FoldSpec load_folds(const ExperimentConfig &config, const RunPaths &paths) {
  const json j = read_json(paths.folds());
  expect_hash(j, paths.folds(), config, Stage::Split);
  return fold_spec_from_json(j);
}

std::vector<std::int32_t> fold_ids(const FeatureMatrix &x, const FoldSpec &spec) {
  std::vector<std::int32_t> ids(x.rows(), -1);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto f = spec.fold_of(Timestamp{std::chrono::seconds{x.keys[r].timestamp}});
    if (f) ids[r] = static_cast<std::int32_t>(*f);
  }
  return ids;
}

struct FoldData {
  std::vector<float> train_x, test_x;
  std::vector<std::uint8_t> train_y, test_y;
};

FoldData split_fold(const LoadedDataset &d, const std::vector<std::int32_t> &ids, std::int32_t fold) {
  FoldData f;
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0) continue;
    const auto row = d.x.row(r);
    auto &x = ids[r] == fold ? f.test_x : f.train_x;
    auto &y = ids[r] == fold ? f.test_y : f.train_y;
    x.insert(x.end(), row.begin(), row.end());
    y.push_back(d.y[r]);
  }
  return f;
}

TrainConfig fold_config(const ExperimentConfig &config, std::size_t fold) {
  TrainConfig c = config.model;
  c.seed = mix_seed(config.seed, fold);
  return c;
}

} // namespace

StageSummary run_split(const ExperimentConfig &config, const RunPaths &paths) {
  config.validate();
  const auto d = load_dataset(config, paths);
  std::set<Timestamp> distinct;
  for (const auto &k : d.x.keys) distinct.insert(Timestamp{std::chrono::seconds{k.timestamp}});
  const std::vector<Timestamp> stamps(distinct.begin(), distinct.end());
  const FoldSpec spec = make_folds(stamps, config.folds, config.margin, config.seed);
  json j = to_json(spec);
  const std::string hash = stage_hash(config, Stage::Split);
  j["config_hash"] = hash;
  const auto ids = fold_ids(d.x, spec);
  json sizes = json::array();
  for (std::size_t f = 0; f < spec.folds.size(); ++f) {
    sizes.push_back(std::count(ids.begin(), ids.end(), static_cast<std::int32_t>(f)));
  }
  j["rows_per_fold"] = sizes;
  j["rows_in_gaps"] = std::count(ids.begin(), ids.end(), -1);
  write_json(paths.folds(), j);
  return {Stage::Split, hash, std::to_string(spec.folds.size()) + " folds, rows per fold " + sizes.dump()};
}

StageSummary run_train(const ExperimentConfig &config, const RunPaths &paths) {
  config.validate();
  const auto d = load_dataset(config, paths);
  const auto spec = load_folds(config, paths);
  const auto ids = fold_ids(d.x, spec);
  const std::string hash = stage_hash(config, Stage::Train);
  fs::create_directories(paths.results / "models");
  for (std::size_t f = 0; f < spec.folds.size(); ++f) {
    const auto fd = split_fold(d, ids, static_cast<std::int32_t>(f));
    if (fd.train_y.empty()) throw Error(ErrorCode::EmptyTraining, "fold " + std::to_string(f) + " has no training rows");
    const MatrixView tx(fd.train_x.data(), fd.train_y.size(), d.x.cols());
    std::optional<MonitorSet> monitor;
    if (config.paper_mode && config.model.kind == ModelKind::Mlp && !fd.test_y.empty()) {
      monitor = MonitorSet{MatrixView(fd.test_x.data(), fd.test_y.size(), d.x.cols()), fd.test_y};
    }
    const Model model = train_model(tx, fd.train_y, fold_config(config, f), d.x.schema, monitor);
    json j = to_json(model);
    j["config_hash"] = hash;
    j["fold"] = f;
    std::ofstream out(paths.model(f), std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + paths.model(f).string());
    out << j.dump() << '\n';
  }
  return {Stage::Train, hash,
          std::to_string(spec.folds.size()) + " " + std::string(model_kind_name(config.model.kind)) + " models"};
}

EvalReport run_evaluate(const ExperimentConfig &config, const RunPaths &paths) {
  config.validate();
  const auto d = load_dataset(config, paths);
  const auto spec = load_folds(config, paths);
  const auto ids = fold_ids(d.x, spec);

  std::vector<FoldReport> folds;
  std::vector<double> pooled_scores;
  std::vector<std::uint8_t> pooled_labels;
  std::vector<double> importance;
  std::size_t importance_models = 0;
  for (std::size_t f = 0; f < spec.folds.size(); ++f) {
    const json mj = read_json(paths.model(f));
    expect_hash(mj, paths.model(f), config, Stage::Train);
    const Model model = model_from_json(mj);
    if (model.schema_fingerprint != d.x.schema.fingerprint()) {
      throw Error(ErrorCode::SchemaMismatch, paths.model(f).string() + " was trained on a different schema");
    }
    const auto fd = split_fold(d, ids, static_cast<std::int32_t>(f));
    FoldReport fr;
    fr.fold = f;
    if (!fd.test_y.empty()) {
      const auto p = predict_proba(model, MatrixView(fd.test_x.data(), fd.test_y.size(), d.x.cols()));
      std::vector<std::uint8_t> predicted(p.size());
      std::transform(p.begin(), p.end(), predicted.begin(), [](double v) { return to_label(static_cast<float>(v)); });
      fr.confusion = ConfusionMatrix::from(predicted, fd.test_y);
      const bool both = std::count(fd.test_y.begin(), fd.test_y.end(), 1) > 0 &&
                        std::count(fd.test_y.begin(), fd.test_y.end(), 0) > 0;
      if (both) fr.auc = roc_auc(p, fd.test_y).auc;
      pooled_scores.insert(pooled_scores.end(), p.begin(), p.end());
      pooled_labels.insert(pooled_labels.end(), fd.test_y.begin(), fd.test_y.end());
    }
    fr.rates = metrics(fr.confusion);
    folds.push_back(fr);
    if (model.is_tree_model()) {
      const auto fi = gini_importance(model);
      if (importance.empty()) importance.assign(fi.size(), 0.0);
      for (std::size_t i = 0; i < fi.size(); ++i) importance[i] += fi[i];
      ++importance_models;
    }
  }
  EvalReport report = aggregate(folds);
  const bool both = std::count(pooled_labels.begin(), pooled_labels.end(), 1) > 0 &&
                    std::count(pooled_labels.begin(), pooled_labels.end(), 0) > 0;
  if (both) report.roc = roc_auc(pooled_scores, pooled_labels);
  report.feature_names = d.x.schema.names;
  if (importance_models > 0) {
    const double sum = std::accumulate(importance.begin(), importance.end(), 0.0);
    for (auto &v : importance) v = sum > 0.0 ? v / sum : 0.0;
    report.importance = importance;
  }
  report.projection = project(report.rates, config.projection.positives, config.projection.negatives,
                              config.projection.target_precision);

  json j = to_json(report);
  j["config_hash"] = stage_hash(config, Stage::Evaluate);
  j["offset"] = format_offset(config.offset);
  j["model"] = model_kind_name(config.model.kind);
  j["schema"] = variant_name(config.schema);
  write_json(paths.report(), j);
  if (report.roc) write_roc_csv(*report.roc, paths.roc().string());
  write_importance_csv(report, paths.importance().string());
  return report;
}

std::string render_stored_report(const RunPaths &paths) {
  const json j = read_json(paths.report());
  std::string header;
  if (j.contains("model")) {
    header = "model " + j.at("model").get<std::string>() + ", schema " + j.value("schema", "?") + ", offset " +
             j.value("offset", "?") + "\n\n";
  }
  return header + render_report(eval_report_from_json(j));
}

EvalReport run_experiment(const ExperimentConfig &config) {
  config.validate();
  RunLock lock(config.out);
  const RunPaths paths(config);
  write_resolved_config(config, paths);
  auto stage = [](Stage s, auto &&fn) {
    try {
      return fn();
    } catch (const Error &e) {
      throw Error(e.code(), "stage " + std::string(stage_name(s)) + ": " + e.what());
    }
  };
  stage(Stage::Ingest, [&] { return run_ingest(config, paths); });
  stage(Stage::Flow, [&] { return run_flow(config, paths); });
  stage(Stage::Featurize, [&] { return run_featurize(config, paths); });
  stage(Stage::Split, [&] { return run_split(config, paths); });
  stage(Stage::Train, [&] { return run_train(config, paths); });
  return stage(Stage::Evaluate, [&] { return run_evaluate(config, paths); });
}

std::vector<OffsetResult> run_offset_sweep(const ExperimentConfig &config, const std::vector<Minutes> &offsets) {
  config.validate();
  for (auto o : offsets) validate_offset(o);
  RunLock lock(config.out);
  ExperimentConfig base = config;
  base.offset = Minutes{0};
  const RunPaths cache(base);
  write_resolved_config(base, cache);
  run_ingest(base, cache);
  run_flow(base, cache);
  std::vector<OffsetResult> results;
  for (auto o : offsets) {
    ExperimentConfig c = config;
    c.offset = o;
    const auto h = o.count() / 60;
    const auto m = o.count() % 60;
    char name[32];
    std::snprintf(name, sizeof name, "offset_%lldh%02lld", static_cast<long long>(h), static_cast<long long>(m));
    const RunPaths paths(config.out, config.out / name);
    write_resolved_config(c, paths);
    run_featurize(c, paths);
    run_split(c, paths);
    run_train(c, paths);
    results.push_back({o, run_evaluate(c, paths)});
  }
  return results;
}

} // namespace stormcast
