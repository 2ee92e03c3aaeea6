#include <algorithm>
#include <cmath>
#include <fstream>

#include "grow.hpp"
#include "stormcast/error.hpp"
#include "stormcast/util.hpp"

namespace stormcast {

using nlohmann::json;

std::string_view model_kind_name(ModelKind kind) noexcept {
  switch (kind) {
  case ModelKind::DecisionTree: return "dt";
  case ModelKind::RandomForest: return "rf";
  case ModelKind::AdaBoost: return "ab";
  case ModelKind::GradientBoosting: return "gb";
  case ModelKind::Mlp: return "mlp";
  }
  return "?";
}

std::optional<ModelKind> parse_model_kind(std::string_view name) noexcept {
  for (auto k : {ModelKind::DecisionTree, ModelKind::RandomForest, ModelKind::AdaBoost,
                 ModelKind::GradientBoosting, ModelKind::Mlp}) {
    if (model_kind_name(k) == name) return k;
  }
  return std::nullopt;
}

std::size_t MinLeaf::resolve(std::size_t n_train) const noexcept {
  const double n = fraction ? std::ceil(value * static_cast<double>(n_train)) : value;
  return std::max<std::size_t>(1, static_cast<std::size_t>(n));
}

TrainConfig TrainConfig::defaults(ModelKind kind) {
  TrainConfig c;
  c.kind = kind;
  switch (kind) {
  case ModelKind::DecisionTree:
    c.max_depth = 12;
    c.n_estimators = 1;
    break;
  case ModelKind::RandomForest:
    c.max_depth = 12;
    c.n_estimators = 200;
    break;
  case ModelKind::AdaBoost:
    c.max_depth = 6;
    c.n_estimators = 50;
    c.learning_rate = 1.0;
    break;
  case ModelKind::GradientBoosting:
    c.max_depth = 7;
    c.n_estimators = 100;
    c.learning_rate = 0.1;
    break;
  case ModelKind::Mlp:
    c.n_estimators = 1;
    break;
  }
  return c;
}

TrainConfig TrainConfig::rf2() {
  TrainConfig c = defaults(ModelKind::RandomForest);
  c.max_depth = 18;
  c.min_leaf = MinLeaf::count(9);
  c.n_estimators = 200;
  return c;
}

void TrainConfig::validate() const {
  auto fail = [](const std::string &msg) { throw Error(ErrorCode::BadConfig, msg); };
  if (max_depth < 1) fail("max_depth must be >= 1");
  if (!(min_leaf.value > 0.0) || !std::isfinite(min_leaf.value)) fail("min_leaf must be > 0");
  if (min_leaf.fraction && min_leaf.value > 1.0) fail("min_leaf fraction must be <= 1");
  if (!min_leaf.fraction && min_leaf.value != std::floor(min_leaf.value)) fail("min_leaf count must be an integer");
  if (n_estimators < 1) fail("n_estimators must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail("learning_rate must be > 0");
  if (max_features && *max_features < 1) fail("max_features must be >= 1");
  if (kind == ModelKind::Mlp) {
    if (mlp.hidden.empty()) fail("mlp.hidden needs at least one layer");
    for (int h : mlp.hidden) {
      if (h < 1) fail("mlp.hidden sizes must be >= 1");
    }
    if (!(mlp.leaky_slope >= 0.0)) fail("mlp.leaky_slope must be >= 0");
    if (!(mlp.learning_rate > 0.0)) fail("mlp.learning_rate must be > 0");
    if (!(mlp.beta1 >= 0.0 && mlp.beta1 < 1.0) || !(mlp.beta2 >= 0.0 && mlp.beta2 < 1.0)) {
      fail("mlp betas must lie in [0, 1)");
    }
    if (!(mlp.epsilon > 0.0)) fail("mlp.epsilon must be > 0");
    if (mlp.epochs < 1 || mlp.batch_size < 1 || mlp.patience < 1) {
      fail("mlp epochs, batch_size and patience must be >= 1");
    }
    if (!(mlp.min_delta >= 0.0)) fail("mlp.min_delta must be >= 0");
    if (!(mlp.holdout >= 0.0 && mlp.holdout < 1.0)) fail("mlp.holdout must lie in [0, 1)");
  }
}

json to_json(const TrainConfig &c) {
  json j;
  j["kind"] = model_kind_name(c.kind);
  j["max_depth"] = c.max_depth;
  j["min_leaf"] = c.min_leaf.fraction ? json{{"fraction", c.min_leaf.value}}
                                      : json{{"count", static_cast<std::int64_t>(c.min_leaf.value)}};
  j["n_estimators"] = c.n_estimators;
  j["learning_rate"] = c.learning_rate;
  j["max_features"] = c.max_features ? json(*c.max_features) : json(nullptr);
  j["bootstrap"] = c.bootstrap;
  j["criterion"] = "gini";
  if (c.kind == ModelKind::GradientBoosting) j["boosting_criterion"] = "friedman_mse";
  j["parallel_jobs"] = c.parallel_jobs;
  j["seed"] = c.seed;
  if (c.kind == ModelKind::Mlp) {
    j["mlp"] = {{"hidden", c.mlp.hidden},         {"leaky_slope", c.mlp.leaky_slope},
                {"learning_rate", c.mlp.learning_rate}, {"beta1", c.mlp.beta1},
                {"beta2", c.mlp.beta2},           {"epsilon", c.mlp.epsilon},
                {"epochs", c.mlp.epochs},         {"batch_size", c.mlp.batch_size},
                {"patience", c.mlp.patience},     {"min_delta", c.mlp.min_delta},
                {"holdout", c.mlp.holdout}};
  }
  return j;
}

TrainConfig train_config_from_json(const json &j) {
  try {
    ModelKind kind = ModelKind::RandomForest;
    if (j.contains("kind")) {
      const auto parsed = parse_model_kind(j.at("kind").get<std::string>());
      if (!parsed) throw Error(ErrorCode::BadConfig, "unknown model kind " + j.at("kind").dump());
      kind = *parsed;
    }
    TrainConfig c = TrainConfig::defaults(kind);
    c.max_depth = j.value("max_depth", c.max_depth);
    if (j.contains("min_leaf")) {
      const auto &m = j.at("min_leaf");
      if (m.is_object() && m.contains("fraction")) {
        c.min_leaf = {m.at("fraction").get<double>(), true};
      } else if (m.is_object() && m.contains("count")) {
        c.min_leaf = {m.at("count").get<double>(), false};
      } else if (m.is_number_integer()) {
        c.min_leaf = {m.get<double>(), false};
      } else if (m.is_number_float() && m.get<double>() < 1.0) {
        c.min_leaf = {m.get<double>(), true};
      } else {
        throw Error(ErrorCode::BadConfig, "min_leaf must be {\"fraction\": f}, {\"count\": n} or a number");
      }
    }
    c.n_estimators = j.value("n_estimators", c.n_estimators);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    if (j.contains("max_features") && !j.at("max_features").is_null()) {
      c.max_features = j.at("max_features").get<int>();
    }
    c.bootstrap = j.value("bootstrap", c.bootstrap);
    c.parallel_jobs = j.value("parallel_jobs", c.parallel_jobs);
    c.seed = j.value("seed", c.seed);
    if (j.contains("criterion") && j.at("criterion") != "gini") {
      throw Error(ErrorCode::BadConfig, "only the gini criterion is supported");
    }
    if (j.contains("mlp")) {
      const auto &m = j.at("mlp");
      c.mlp.hidden = m.value("hidden", c.mlp.hidden);
      c.mlp.leaky_slope = m.value("leaky_slope", c.mlp.leaky_slope);
      c.mlp.learning_rate = m.value("learning_rate", c.mlp.learning_rate);
      c.mlp.beta1 = m.value("beta1", c.mlp.beta1);
      c.mlp.beta2 = m.value("beta2", c.mlp.beta2);
      c.mlp.epsilon = m.value("epsilon", c.mlp.epsilon);
      c.mlp.epochs = m.value("epochs", c.mlp.epochs);
      c.mlp.batch_size = m.value("batch_size", c.mlp.batch_size);
      c.mlp.patience = m.value("patience", c.mlp.patience);
      c.mlp.min_delta = m.value("min_delta", c.mlp.min_delta);
      c.mlp.holdout = m.value("holdout", c.mlp.holdout);
    }
    c.validate();
    return c;
  } catch (const json::exception &e) {
    throw Error(ErrorCode::BadConfig, std::string("train config: ") + e.what());
  }
}

// ---------------------------------------------------------------------------

namespace {

NormalizationStats stats_of(MatrixView x) {
  NormalizationStats s{std::vector<float>(x.cols, 0.0f), std::vector<float>(x.cols, 0.0f)};
  for (std::size_t r = 0; r < x.rows; ++r) {
    for (std::size_t c = 0; c < x.cols; ++c) {
      const float v = x.at(r, c);
      if (r == 0 || v < s.min[c]) s.min[c] = v;
      if (r == 0 || v > s.max[c]) s.max[c] = v;
    }
  }
  return s;
}

std::vector<float> apply_stats(MatrixView x, const NormalizationStats &s) {
  std::vector<float> out(x.rows * x.cols);
  for (std::size_t r = 0; r < x.rows; ++r) {
    for (std::size_t c = 0; c < x.cols; ++c) {
      const double range = static_cast<double>(s.max[c]) - s.min[c];
      const double v = range > 0.0 ? (x.at(r, c) - static_cast<double>(s.min[c])) / range : 0.0;
      out[r * x.cols + c] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return out;
}

} // namespace

Model train_model(MatrixView x, std::span<const std::uint8_t> labels, const TrainConfig &config,
                  const FeatureSchema &schema, std::optional<MonitorSet> monitor) {
  if (schema.size() != x.cols) {
    throw Error(ErrorCode::SchemaMismatch, "schema has " + std::to_string(schema.size()) +
                                               " names for " + std::to_string(x.cols) + " columns");
  }
  Model m;
  m.config = config;
  m.schema_fingerprint = schema.fingerprint();
  m.feature_names = schema.names;
  switch (config.kind) {
  case ModelKind::DecisionTree: {
    EnsembleModel e;
    e.kind = ModelKind::DecisionTree;
    e.trees.push_back(train_tree(x, labels, config));
    e.weights.push_back(1.0);
    m.body = std::move(e);
    break;
  }
  case ModelKind::RandomForest: m.body = train_random_forest(x, labels, config); break;
  case ModelKind::AdaBoost: m.body = train_adaboost(x, labels, config); break;
  case ModelKind::GradientBoosting: m.body = train_gradient_boosting(x, labels, config); break;
  case ModelKind::Mlp: {
    const auto stats = stats_of(x);
    const auto xn = apply_stats(x, stats);
    std::vector<float> mn;
    std::optional<MonitorSet> mon;
    if (monitor) {
      if (monitor->x.cols != x.cols) {
        throw Error(ErrorCode::SchemaMismatch, "monitor set width differs from the training matrix");
      }
      mn = apply_stats(monitor->x, stats);
      mon = MonitorSet{MatrixView(mn.data(), monitor->x.rows, x.cols), monitor->labels};
    }
    m.body = train_mlp(MatrixView(xn.data(), x.rows, x.cols), labels, config, mon);
    m.normalization = stats;
    break;
  }
  }
  return m;
}

std::vector<double> predict_proba(const Model &model, MatrixView x) {
  if (x.cols != model.feature_count()) {
    throw Error(ErrorCode::SchemaMismatch, "rows have " + std::to_string(x.cols) +
                                               " features, model expects " +
                                               std::to_string(model.feature_count()));
  }
  if (const auto *e = std::get_if<EnsembleModel>(&model.body)) {
    return predict_proba(*e, x, model.config.parallel_jobs);
  }
  const auto &mlp = std::get<MlpModel>(model.body);
  if (model.normalization) {
    const auto xn = apply_stats(x, *model.normalization);
    return mlp_forward(mlp, MatrixView(xn.data(), x.rows, x.cols));
  }
  return mlp_forward(mlp, x);
}

std::vector<std::uint8_t> predict(const Model &model, MatrixView x, double threshold) {
  const auto p = predict_proba(model, x);
  std::vector<std::uint8_t> out(p.size());
  std::transform(p.begin(), p.end(), out.begin(),
                 [threshold](double v) { return static_cast<std::uint8_t>(v >= threshold ? 1 : 0); });
  return out;
}

std::vector<double> gini_importance(const Model &model) {
  const auto *e = std::get_if<EnsembleModel>(&model.body);
  if (!e) {
    throw Error(ErrorCode::NotTreeModel, "feature importance needs a tree-based model");
  }
  return gini_importance(*e, model.feature_count());
}

// ---------------------------------------------------------------------------
// Serialisation
// ---------------------------------------------------------------------------

namespace {

json node_to_json(const Tree &tree, std::size_t i) {
  const auto &n = tree.nodes[i];
  json j{{"samples", n.samples}, {"weight", n.weight}, {"value", n.value}, {"impurity", n.impurity}};
  if (!n.is_leaf()) {
    j["feature"] = n.feature;
    j["threshold"] = n.threshold;
    j["left"] = node_to_json(tree, static_cast<std::size_t>(n.left));
    j["right"] = node_to_json(tree, static_cast<std::size_t>(n.right));
  }
  return j;
}

std::int32_t node_from_json(const json &j, Tree &tree, std::size_t n_features) {
  const auto id = static_cast<std::int32_t>(tree.nodes.size());
  TreeNode n;
  n.samples = j.at("samples").get<std::uint32_t>();
  n.weight = j.at("weight").get<double>();
  n.value = j.at("value").get<double>();
  n.impurity = j.at("impurity").get<double>();
  tree.nodes.push_back(n);
  if (j.contains("feature")) {
    const auto f = j.at("feature").get<std::int32_t>();
    if (f < 0 || static_cast<std::size_t>(f) >= n_features) {
      throw Error(ErrorCode::SchemaMismatch, "tree node splits on unknown feature " + std::to_string(f));
    }
    const double thr = j.at("threshold").get<double>();
    const auto left = node_from_json(j.at("left"), tree, n_features);
    const auto right = node_from_json(j.at("right"), tree, n_features);
    auto &node = tree.nodes[static_cast<std::size_t>(id)];
    node.feature = f;
    node.threshold = thr;
    node.left = left;
    node.right = right;
  }
  return id;
}

std::vector<float> to_floats(const std::vector<double> &v) { return {v.begin(), v.end()}; }

std::vector<double> decode_doubles(const json &j) {
  const auto f = decode_f32(j.get<std::string>());
  return {f.begin(), f.end()};
}

} // namespace

json to_json(const Model &model) {
  json j;
  j["format"] = "stormcast-model";
  j["version"] = 1;
  j["kind"] = model_kind_name(model.config.kind);
  j["config"] = to_json(model.config);
  j["seed"] = model.config.seed;
  j["schema_fingerprint"] = model.schema_fingerprint;
  j["features"] = model.feature_names;
  if (model.normalization) {
    j["normalization"] = {{"min", encode_f32(model.normalization->min)},
                          {"max", encode_f32(model.normalization->max)}};
  } else {
    j["normalization"] = nullptr;
  }
  if (const auto *e = std::get_if<EnsembleModel>(&model.body)) {
    json trees = json::array();
    for (const auto &t : e->trees) trees.push_back(node_to_json(t, 0));
    j["ensemble"] = {{"trees", trees},
                     {"weights", e->weights},
                     {"tree_seeds", e->tree_seeds},
                     {"initial_log_odds", e->initial_log_odds},
                     {"shrinkage", e->shrinkage},
                     {"stage_loss", e->stage_loss},
                     {"stage_error", e->stage_error}};
  } else {
    const auto &m = std::get<MlpModel>(model.body);
    json layers = json::array();
    for (const auto &l : m.layers) {
      layers.push_back({{"inputs", l.inputs},
                        {"outputs", l.outputs},
                        {"weights", encode_f32(to_floats(l.weights))},
                        {"bias", encode_f32(to_floats(l.bias))}});
    }
    json log = json::array();
    for (const auto &e : m.log) {
      log.push_back({{"epoch", e.epoch}, {"loss", e.loss}, {"accuracy", e.accuracy},
                     {"monitor_accuracy", e.monitor_accuracy}});
    }
    j["mlp"] = {{"leaky_slope", m.leaky_slope}, {"layers", layers}, {"log", log},
                {"stopped_epoch", m.stopped_epoch}};
  }
  return j;
}

Model model_from_json(const json &j) {
  try {
    if (j.value("format", "") != "stormcast-model") {
      throw Error(ErrorCode::BadConfig, "not a stormcast model file");
    }
    Model m;
    m.config = train_config_from_json(j.at("config"));
    m.schema_fingerprint = j.at("schema_fingerprint").get<std::string>();
    m.feature_names = j.at("features").get<std::vector<std::string>>();
    if (!j.at("normalization").is_null()) {
      const auto &n = j.at("normalization");
      m.normalization = NormalizationStats{decode_f32(n.at("min").get<std::string>()),
                                           decode_f32(n.at("max").get<std::string>())};
    }
    if (j.contains("ensemble")) {
      const auto &e = j.at("ensemble");
      EnsembleModel em;
      em.kind = m.config.kind;
      for (const auto &t : e.at("trees")) {
        Tree tree;
        node_from_json(t, tree, m.feature_names.size());
        em.trees.push_back(std::move(tree));
      }
      em.weights = e.at("weights").get<std::vector<double>>();
      em.tree_seeds = e.at("tree_seeds").get<std::vector<std::uint64_t>>();
      em.initial_log_odds = e.at("initial_log_odds").get<double>();
      em.shrinkage = e.at("shrinkage").get<double>();
      em.stage_loss = e.at("stage_loss").get<std::vector<double>>();
      em.stage_error = e.at("stage_error").get<std::vector<double>>();
      if (em.weights.size() != em.trees.size()) {
        throw Error(ErrorCode::BadConfig, "ensemble weight count differs from the tree count");
      }
      m.body = std::move(em);
    } else {
      const auto &mj = j.at("mlp");
      MlpModel mlp;
      mlp.leaky_slope = mj.at("leaky_slope").get<double>();
      for (const auto &l : mj.at("layers")) {
        DenseLayer layer;
        layer.inputs = l.at("inputs").get<int>();
        layer.outputs = l.at("outputs").get<int>();
        layer.weights = decode_doubles(l.at("weights"));
        layer.bias = decode_doubles(l.at("bias"));
        if (layer.weights.size() != static_cast<std::size_t>(layer.inputs) * layer.outputs ||
            layer.bias.size() != static_cast<std::size_t>(layer.outputs)) {
          throw Error(ErrorCode::BadConfig, "MLP layer payload does not match its shape");
        }
        mlp.layers.push_back(std::move(layer));
      }
      for (const auto &e : mj.at("log")) {
        mlp.log.push_back({e.at("epoch").get<int>(), e.at("loss").get<double>(),
                           e.at("accuracy").get<double>(), e.at("monitor_accuracy").get<double>()});
      }
      mlp.stopped_epoch = mj.at("stopped_epoch").get<int>();
      m.body = std::move(mlp);
    }
    return m;
  } catch (const json::exception &e) {
    throw Error(ErrorCode::BadConfig, std::string("model file: ") + e.what());
  }
}

void save_model(const Model &model, const std::string &path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out << to_json(model).dump() << '\n';
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path);
}

Model load_model(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingArtifact, "cannot open model " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception &e) {
    throw Error(ErrorCode::BadConfig, path + ": " + e.what());
  }
  return model_from_json(j);
}

} // namespace stormcast
