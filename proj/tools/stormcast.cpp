#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "stormcast/experiment.hpp"
#include "stormcast/sampling.hpp"

using namespace stormcast;
using nlohmann::json;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string schema;
  std::string offset;
  std::string model;
  std::string out;
  bool paper_mode = false;
  std::vector<std::string> sets;
};

void add_common(CLI::App *cmd, CommonFlags &f) {
  cmd->add_option("--config", f.config, "Experiment config (JSON)");
  cmd->add_option("--seed", f.seed, "Run seed");
  cmd->add_option("--schema", f.schema, "Feature schema: error153 or ext129");
  cmd->add_option("--offset", f.offset, "Forecast offset h:mm");
  cmd->add_option("--model", f.model, "Model kind: dt, rf, ab, gb or mlp");
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_flag("--paper-mode", f.paper_mode, "MLP early stopping watches the test fold");
  cmd->add_option("--set", f.sets, "Config override key.path=value (repeatable)");
}

ExperimentConfig resolve(const CommonFlags &f) {
  json doc = json::object();
  if (!f.config.empty()) {
    std::ifstream in(f.config);
    if (!in) throw Error(ErrorCode::BadConfig, "cannot open config " + f.config);
    try {
      in >> doc;
    } catch (const json::exception &e) {
      throw Error(ErrorCode::BadConfig, f.config + ": " + e.what());
    }
  }
  if (f.seed) doc["seed"] = *f.seed;
  if (!f.schema.empty()) doc["schema"] = f.schema;
  if (!f.offset.empty()) doc["offset"] = f.offset;
  if (!f.model.empty()) {
    const auto kind = parse_model_kind(f.model);
    if (!kind) throw Error(ErrorCode::BadConfig, "unknown model " + f.model);
    const bool same = doc.contains("model") && doc["model"].value("kind", "") == f.model;
    if (!same) doc["model"] = to_json(TrainConfig::defaults(*kind));
  }
  if (!f.out.empty()) doc["out"] = f.out;
  if (f.paper_mode) doc["paper_mode"] = true;
  for (const auto &s : f.sets) apply_override(doc, s);
  return experiment_config_from_json(doc);
}

void print(const StageSummary &s) {
  std::cout << stage_name(s.stage) << " [" << s.hash << "] " << s.detail << '\n';
}

ConfusionMatrix parse_confusion(const std::string &text) {
  std::vector<std::uint64_t> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::erase(item, '_');
    try {
      std::size_t used = 0;
      v.push_back(std::stoull(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception &) {
      throw Error(ErrorCode::InvalidArgument, "confusion counts must be integers: " + text);
    }
  }
  if (v.size() != 4) throw Error(ErrorCode::InvalidArgument, "--confusion wants TP,FP,TN,FN");
  return ConfusionMatrix{v[0], v[1], v[2], v[3]};
}

std::vector<Minutes> parse_offsets(const std::string &text) {
  std::vector<Minutes> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto o = parse_offset(item);
    if (!o) throw Error(ErrorCode::InvalidOffset, "offset " + item + " is not of the form h:mm");
    validate_offset(*o);
    out.push_back(*o);
  }
  if (out.empty()) throw Error(ErrorCode::InvalidOffset, "no offsets given");
  return out;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Lightning nowcasting from satellite frame extrapolation errors"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string confusion;
  std::string offsets;

  struct StageCommand {
    const char *name;
    const char *help;
    Stage stage;
  };
  const StageCommand stage_commands[] = {
      {"ingest", "Read or synthesize frames and rasterize lightning", Stage::Ingest},
      {"flow", "Extrapolate frames and store error fields", Stage::Flow},
      {"featurize", "Label, balance and assemble the feature matrix", Stage::Featurize},
      {"split", "Time-blocked folds with a gap margin", Stage::Split},
      {"train", "Train one model per fold", Stage::Train},
      {"evaluate", "Score held-out folds and write the report", Stage::Evaluate},
  };
  std::vector<std::pair<CLI::App *, Stage>> stages;
  for (const auto &sc : stage_commands) {
    auto *cmd = app.add_subcommand(sc.name, sc.help);
    add_common(cmd, flags);
    stages.emplace_back(cmd, sc.stage);
  }
  auto *report = app.add_subcommand("report", "Render a stored report, or rates from given counts");
  add_common(report, flags);
  report->add_option("--confusion", confusion, "TP,FP,TN,FN counts to summarize instead of a stored report");
  auto *run = app.add_subcommand("run", "All stages end to end");
  add_common(run, flags);
  run->add_option("--offsets", offsets, "Comma-separated offsets for a sweep, e.g. 0:00,1:00,2:00");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (report->parsed() && !confusion.empty()) {
      FoldReport fr;
      fr.confusion = parse_confusion(confusion);
      fr.rates = metrics(fr.confusion);
      EvalReport r = aggregate(std::span<const FoldReport>(&fr, 1));
      const ExperimentConfig config = resolve(flags);
      r.projection = project(r.rates, config.projection.positives, config.projection.negatives,
                             config.projection.target_precision);
      std::cout << render_report(r);
      return 0;
    }
    const ExperimentConfig config = resolve(flags);
    const RunPaths paths(config);
    if (report->parsed()) {
      std::cout << render_stored_report(paths);
      return 0;
    }
    if (run->parsed()) {
      if (!offsets.empty()) {
        for (const auto &r : run_offset_sweep(config, parse_offsets(offsets))) {
          std::cout << "offset " << format_offset(r.offset) << "\n" << render_report(r.report) << '\n';
        }
      } else {
        std::cout << render_report(run_experiment(config));
      }
      return 0;
    }
    for (const auto &[cmd, stage] : stages) {
      if (!cmd->parsed()) continue;
      RunLock lock(config.out);
      write_resolved_config(config, paths);
      switch (stage) {
      case Stage::Ingest: print(run_ingest(config, paths)); break;
      case Stage::Flow: print(run_flow(config, paths)); break;
      case Stage::Featurize: print(run_featurize(config, paths)); break;
      case Stage::Split: print(run_split(config, paths)); break;
      case Stage::Train: print(run_train(config, paths)); break;
      case Stage::Evaluate:
        run_evaluate(config, paths);
        std::cout << render_stored_report(paths);
        break;
      }
    }
    return 0;
  } catch (const Error &e) {
    std::cerr << "error: " << e.what() << '\n';
    return is_validation_error(e.code()) ? 2 : 1;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
