#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "stormcast/experiment.hpp"
#include "stormcast/ingest.hpp"
#include "temp_dir.hpp"

using namespace stormcast;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny(const fs::path &out) {
  ExperimentConfig c;
  c.data.scene.geometry = {24, 24, 45, 55, 5, 15};
  c.data.scene.frames = 120;
  c.data.scene.convection_rate = 0.5;
  c.folds = 2;
  c.margin = Minutes{120};
  c.model = TrainConfig::defaults(ModelKind::RandomForest);
  c.model.n_estimators = 10;
  c.flow.nscales = 3;
  c.flow.warps = 2;
  c.out = out;
  return c;
}

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

} // namespace

TEST_CASE("config overrides reach nested keys") {
  nlohmann::json doc = {{"model", {{"kind", "rf"}}}};
  apply_override(doc, "model.n_estimators=17");
  apply_override(doc, "folds.k=3");
  apply_override(doc, "offset=1:00");
  CHECK(doc["model"]["n_estimators"] == 17);
  CHECK(doc["folds"]["k"] == 3);
  CHECK(doc["offset"] == "1:00");
  CHECK_THROWS_AS(apply_override(doc, "novalue"), Error);
  const auto c = experiment_config_from_json(doc);
  CHECK(c.model.n_estimators == 17);
  CHECK(c.folds == 3);
  CHECK(c.offset == Minutes{60});
}

TEST_CASE("experiment configs round-trip") {
  auto c = tiny("x");
  c.flow_channel = Channel::IR108;
  c.schema = SchemaVariant::ErrorOnly153;
  const auto back = experiment_config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
  CHECK(stage_hash(back, Stage::Evaluate) == stage_hash(c, Stage::Evaluate));
}

TEST_CASE("invalid offsets are rejected before any work") {
  nlohmann::json doc = {{"offset", "0:07"}};
  CHECK_THROWS_WITH_AS(experiment_config_from_json(doc), doctest::Contains("InvalidOffset"), Error);
}

TEST_CASE("stage hashes only change downstream of the edit") {
  const auto a = tiny("x");
  auto b = a;
  b.model.n_estimators = 11;
  CHECK(stage_hash(a, Stage::Split) == stage_hash(b, Stage::Split));
  CHECK(stage_hash(a, Stage::Train) != stage_hash(b, Stage::Train));
  b = a;
  b.offset = Minutes{15};
  CHECK(stage_hash(a, Stage::Flow) == stage_hash(b, Stage::Flow));
  CHECK(stage_hash(a, Stage::Featurize) != stage_hash(b, Stage::Featurize));
  b = a;
  b.model.parallel_jobs = 3;
  CHECK(stage_hash(a, Stage::Evaluate) == stage_hash(b, Stage::Evaluate));
}

TEST_CASE("compact timestamps name cache directories") {
  CHECK(compact_timestamp(*parse_timestamp("2018-06-01T12:15:00Z")) == "20180601T121500Z");
}

TEST_CASE("a second run on the same directory is locked out") {
  TempDir dir("lock");
  RunLock lock(dir.path);
  CHECK_THROWS_WITH_AS(RunLock(dir.path), doctest::Contains("Locked"), Error);
}

TEST_CASE("stages report missing and stale inputs") {
  TempDir dir("stale");
  const auto c = tiny(dir.path);
  const RunPaths paths(c);
  CHECK_THROWS_WITH_AS(run_flow(c, paths), doctest::Contains("MissingArtifact"), Error);
  run_ingest(c, paths);
  auto changed = c;
  changed.data.scene.seed = 77;
  CHECK_THROWS_WITH_AS(run_flow(changed, paths), doctest::Contains("ConfigHashMismatch"), Error);
}

TEST_CASE("staged and monolithic runs agree byte for byte") {
  TempDir a("staged"), b("mono");
  const auto ca = tiny(a.path);
  const RunPaths pa(ca);
  run_ingest(ca, pa);
  run_flow(ca, pa);
  run_featurize(ca, pa);
  run_split(ca, pa);
  run_train(ca, pa);
  const auto ra = run_evaluate(ca, pa);

  const auto cb = tiny(b.path);
  const auto rb = run_experiment(cb);
  CHECK(ra.overall == rb.overall);
  const RunPaths pb(cb);
  CHECK(slurp(pa.dataset()) == slurp(pb.dataset()));
  CHECK(slurp(pa.model(0)) == slurp(pb.model(0)));
  CHECK(slurp(pa.model(1)) == slurp(pb.model(1)));
  CHECK(slurp(pa.report()) == slurp(pb.report()));
  CHECK(fs::exists(pb.roc()));
  CHECK(fs::exists(pb.importance()));
  CHECK(fs::exists(pb.results / "config.resolved.json"));
  CHECK_FALSE(fs::exists(pb.results / ".stormcast.lock"));
  CHECK(render_stored_report(pb).find("overall") != std::string::npos);
}
