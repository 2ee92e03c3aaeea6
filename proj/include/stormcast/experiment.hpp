#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stormcast/eval.hpp"
#include "stormcast/features.hpp"
#include "stormcast/flow.hpp"
#include "stormcast/models.hpp"
#include "stormcast/synth.hpp"

namespace stormcast {

struct DataSource {
  enum class Kind { Synth, Files };
  Kind kind = Kind::Synth;
  SceneConfig scene; // Synth
  /// Files: `<frames_dir>/<anything>/<channel>.grid` frame files and a
  /// lightning CSV, on `geometry`.
  std::filesystem::path frames_dir;
  std::filesystem::path lightning_csv;
  GridGeometry geometry;
};

struct ProjectionConfig {
  double positives = 1238550.0;
  double negatives = 1876590909.0;
  double target_precision = 0.2;
};

struct ExperimentConfig {
  DataSource data;
  SchemaVariant schema = SchemaVariant::Extended129;
  Minutes offset{0};
  std::size_t folds = 4;
  Minutes margin{720};
  TrainConfig model = TrainConfig::rf2();
  FlowParams flow;
  std::optional<Channel> flow_channel; // one shared flow per frame instead of one per channel
  std::uint64_t seed = 0;
  bool paper_mode = false; // MLP early stopping watches the test fold
  ProjectionConfig projection;
  std::filesystem::path out = "stormcast-out";

  /// Throws BadConfig, InvalidOffset.
  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig &config);
/// Missing keys keep their defaults. Throws BadConfig, InvalidOffset.
ExperimentConfig experiment_config_from_json(const nlohmann::json &j);
ExperimentConfig load_experiment_config(const std::filesystem::path &path);

/// Applies `a.b.c=value` to a JSON document; value is parsed as JSON when
/// possible and kept as a string otherwise. Throws BadConfig.
void apply_override(nlohmann::json &doc, std::string_view assignment);

enum class Stage { Ingest, Flow, Featurize, Split, Train, Evaluate };

std::string_view stage_name(Stage stage) noexcept;

/// Hash of everything a stage's output depends on, its upstream included.
std::string stage_hash(const ExperimentConfig &config, Stage stage);

/// `YYYYMMDDTHHMMSSZ`, used for cache directory names.
std::string compact_timestamp(Timestamp t);

/// Output layout. Frame, raster and error caches live in `cache`; the
/// offset-specific artifacts in `results`.
struct RunPaths {
  std::filesystem::path cache;
  std::filesystem::path results;

  explicit RunPaths(const ExperimentConfig &config);
  RunPaths(std::filesystem::path cache_dir, std::filesystem::path results_dir);

  std::filesystem::path frames() const { return cache / "frames"; }
  std::filesystem::path rasters() const { return cache / "rasters"; }
  std::filesystem::path errors() const { return cache / "errors"; }
  std::filesystem::path lightning_csv() const { return cache / "lightning.csv"; }
  std::filesystem::path dataset() const { return results / "dataset.grid"; }
  std::filesystem::path folds() const { return results / "folds.json"; }
  std::filesystem::path model(std::size_t fold) const {
    return results / "models" / ("model_fold" + std::to_string(fold) + ".json");
  }
  std::filesystem::path report() const { return results / "report.json"; }
  std::filesystem::path roc() const { return results / "roc.csv"; }
  std::filesystem::path importance() const { return results / "importance.csv"; }
};

/// Exclusive use of an output directory for the lifetime of the object.
class RunLock {
public:
  explicit RunLock(const std::filesystem::path &dir); // throws Locked
  ~RunLock();
  RunLock(const RunLock &) = delete;
  RunLock &operator=(const RunLock &) = delete;

private:
  std::filesystem::path path_;
};

struct StageSummary {
  Stage stage;
  std::string hash;
  std::string detail;
};

// Stages read their predecessor's artifacts and fail with MissingArtifact or
// ConfigHashMismatch when those are absent or stale.
StageSummary run_ingest(const ExperimentConfig &config, const RunPaths &paths);
StageSummary run_flow(const ExperimentConfig &config, const RunPaths &paths);
StageSummary run_featurize(const ExperimentConfig &config, const RunPaths &paths);
StageSummary run_split(const ExperimentConfig &config, const RunPaths &paths);
StageSummary run_train(const ExperimentConfig &config, const RunPaths &paths);
EvalReport run_evaluate(const ExperimentConfig &config, const RunPaths &paths);

/// Renders the stored report.
std::string render_stored_report(const RunPaths &paths);

/// Writes the resolved configuration next to the outputs.
void write_resolved_config(const ExperimentConfig &config, const RunPaths &paths);

/// All stages in order under a lock on the output directory.
EvalReport run_experiment(const ExperimentConfig &config);

struct OffsetResult {
  Minutes offset;
  EvalReport report;
};

/// One full evaluation per offset, sharing the frame and error caches; each
/// offset writes into `<out>/offset_<h>h<mm>/`.
std::vector<OffsetResult> run_offset_sweep(const ExperimentConfig &config,
                                           const std::vector<Minutes> &offsets);

} // namespace stormcast
