#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "stormcast/features.hpp"

namespace stormcast {

/// Non-owning row-major float matrix.
struct MatrixView {
  const float *data = nullptr;
  std::size_t rows = 0;
  std::size_t cols = 0;

  MatrixView() = default;
  MatrixView(const float *d, std::size_t r, std::size_t c) : data(d), rows(r), cols(c) {}
  MatrixView(const FeatureMatrix &m) : data(m.values.data()), rows(m.rows()), cols(m.cols()) {}

  float at(std::size_t r, std::size_t c) const noexcept { return data[r * cols + c]; }
  std::span<const float> row(std::size_t r) const noexcept { return {data + r * cols, cols}; }
};

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

enum class ModelKind : std::uint8_t { DecisionTree, RandomForest, AdaBoost, GradientBoosting, Mlp };

std::string_view model_kind_name(ModelKind kind) noexcept; // dt, rf, ab, gb, mlp
std::optional<ModelKind> parse_model_kind(std::string_view name) noexcept;

/// Minimum rows per leaf, either a fraction of the training rows or a count.
struct MinLeaf {
  double value = 0.0001;
  bool fraction = true;

  /// ceil(value * n) for fractions, floor 1.
  std::size_t resolve(std::size_t n_train) const noexcept;
  static MinLeaf count(std::size_t n) { return {static_cast<double>(n), false}; }
  friend bool operator==(const MinLeaf &, const MinLeaf &) = default;
};

struct MlpConfig {
  std::vector<int> hidden{64, 64, 64, 32, 32, 32, 16, 16, 16};
  double leaky_slope = 0.01;
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int epochs = 500;
  std::size_t batch_size = 25000;
  int patience = 50;
  double min_delta = 0.0001; // accuracy must improve by 0.01 %
  double holdout = 0.1;      // monitor fraction when no monitor set is given

  friend bool operator==(const MlpConfig &, const MlpConfig &) = default;
};

struct TrainConfig {
  ModelKind kind = ModelKind::RandomForest;
  int max_depth = 12;
  MinLeaf min_leaf;
  int n_estimators = 200;
  double learning_rate = 1.0;
  std::optional<int> max_features; // per split; unset = sqrt(F) for RF, all otherwise
  bool bootstrap = true;           // RF only
  unsigned parallel_jobs = 0;      // 0 = all cores
  std::uint64_t seed = 0;
  MlpConfig mlp;

  /// Classifier settings used in the paper's first experiment.
  static TrainConfig defaults(ModelKind kind);
  /// The tuned forest: depth 18, 9 rows per leaf, 200 trees.
  static TrainConfig rf2();

  /// Throws BadConfig.
  void validate() const;
  friend bool operator==(const TrainConfig &, const TrainConfig &) = default;
};

nlohmann::json to_json(const TrainConfig &config);
/// Missing keys keep the defaults of the named kind. Throws BadConfig.
TrainConfig train_config_from_json(const nlohmann::json &j);

// ---------------------------------------------------------------------------
// Trees
// ---------------------------------------------------------------------------

/// 1 - sum p_i^2. Throws BadDistribution unless p is a distribution.
double gini(std::span<const double> p);

struct TreeNode {
  std::int32_t feature = -1; // -1 for leaves
  double threshold = 0.0;    // rows with x <= threshold go left
  std::int32_t left = -1;
  std::int32_t right = -1;
  std::uint32_t samples = 0; // training rows reaching the node
  double weight = 0.0;       // their total sample weight
  double value = 0.0;        // P(class 1) for classifiers, output for regression trees
  double impurity = 0.0;     // gini or variance

  bool is_leaf() const noexcept { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes; // nodes[0] is the root

  std::size_t leaf_of(std::span<const float> row) const noexcept;
  double predict(std::span<const float> row) const noexcept { return nodes[leaf_of(row)].value; }
  int depth() const;
  std::size_t leaf_count() const;
};

struct Split {
  std::size_t feature = 0;
  double threshold = 0.0;
  double decrease = 0.0; // g(parent) - N_L/N g(left) - N_R/N g(right)
};

/// Best gini split of `rows` over `features`, scanning midpoints between
/// consecutive distinct values. Ties go to the lowest feature index, then the
/// lowest threshold. Throws NoValidSplit, InvalidArgument.
Split best_split(MatrixView x, std::span<const std::uint8_t> labels,
                 std::span<const std::size_t> rows, std::span<const std::size_t> features);

/// CART classifier with gini splits. Throws EmptyTraining.
Tree train_tree(MatrixView x, std::span<const std::uint8_t> labels, const TrainConfig &config);

// ---------------------------------------------------------------------------
// Ensembles
// ---------------------------------------------------------------------------

struct EnsembleModel {
  ModelKind kind = ModelKind::DecisionTree;
  std::vector<Tree> trees;
  std::vector<double> weights;          // alpha_t; 1 for DT / RF / GB
  std::vector<std::uint64_t> tree_seeds; // RF bootstrap seeds
  double initial_log_odds = 0.0;        // GB
  double shrinkage = 1.0;               // GB
  /// Training-set loss after each stage, starting with the empty ensemble:
  /// binomial deviance for GB, exponential loss for AB.
  std::vector<double> stage_loss;
  std::vector<double> stage_error; // AB weighted error of each kept stage
};

EnsembleModel train_random_forest(MatrixView x, std::span<const std::uint8_t> labels,
                                  const TrainConfig &config);
EnsembleModel train_adaboost(MatrixView x, std::span<const std::uint8_t> labels,
                             const TrainConfig &config);
/// n_estimators = 0 is accepted and yields the prior-only model.
EnsembleModel train_gradient_boosting(MatrixView x, std::span<const std::uint8_t> labels,
                                      const TrainConfig &config);

// ---------------------------------------------------------------------------
// MLP
// ---------------------------------------------------------------------------

struct DenseLayer {
  int inputs = 0;
  int outputs = 0;
  std::vector<double> weights; // outputs x inputs, row-major
  std::vector<double> bias;
};

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;
  double monitor_accuracy = 0.0;
};

struct MlpModel {
  std::vector<DenseLayer> layers; // hidden layers, then the single output unit
  double leaky_slope = 0.01;
  std::vector<EpochLog> log;
  int stopped_epoch = 0;
};

/// Glorot-uniform weights, zero biases.
MlpModel init_mlp(std::size_t inputs, const MlpConfig &config, std::uint64_t seed);

struct MlpGradient {
  double loss = 0.0;     // mean binary cross-entropy
  double accuracy = 0.0; // before the update
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> bias;
};

double mlp_loss(const MlpModel &model, MatrixView x, std::span<const std::uint8_t> labels);
MlpGradient mlp_gradient(const MlpModel &model, MatrixView x, std::span<const std::uint8_t> labels);
std::vector<double> mlp_forward(const MlpModel &model, MatrixView x);

struct MonitorSet {
  MatrixView x;
  std::span<const std::uint8_t> labels;
};

/// Adam on mini-batches with early stopping on monitor accuracy. Without a
/// monitor set, a seeded holdout of the training rows is used.
/// Throws EmptyTraining, NonNormalizedInput.
MlpModel train_mlp(MatrixView x, std::span<const std::uint8_t> labels, const TrainConfig &config,
                   std::optional<MonitorSet> monitor = std::nullopt);

// ---------------------------------------------------------------------------
// Trained models
// ---------------------------------------------------------------------------

struct Model {
  TrainConfig config;
  std::string schema_fingerprint;
  std::vector<std::string> feature_names;
  std::optional<NormalizationStats> normalization; // applied before the MLP
  std::variant<EnsembleModel, MlpModel> body;

  std::size_t feature_count() const noexcept { return feature_names.size(); }
  bool is_tree_model() const noexcept { return std::holds_alternative<EnsembleModel>(body); }
};

/// Dispatches on config.kind. `schema` describes the columns of x.
Model train_model(MatrixView x, std::span<const std::uint8_t> labels, const TrainConfig &config,
                  const FeatureSchema &schema, std::optional<MonitorSet> monitor = std::nullopt);

/// Throws SchemaMismatch when x has the wrong width.
std::vector<double> predict_proba(const Model &model, MatrixView x);
std::vector<std::uint8_t> predict(const Model &model, MatrixView x, double threshold = 0.5);
std::vector<double> predict_proba(const EnsembleModel &model, MatrixView x, unsigned jobs = 0);

/// Weighted gini decrease per feature, normalised to sum 1 (all zeros when
/// no split exists). Throws NotTreeModel.
std::vector<double> gini_importance(const Model &model);
std::vector<double> gini_importance(const EnsembleModel &model, std::size_t n_features);

nlohmann::json to_json(const Model &model);
Model model_from_json(const nlohmann::json &j);
void save_model(const Model &model, const std::string &path);
Model load_model(const std::string &path);

// ---------------------------------------------------------------------------
// Grid search
// ---------------------------------------------------------------------------

struct ParamGrid {
  std::vector<int> n_estimators{50, 100, 200, 300};
  std::vector<int> max_depth{14, 18, 22, 26};
  std::vector<std::size_t> min_leaf{3, 9, 27, 81};

  std::size_t size() const noexcept {
    return n_estimators.size() * max_depth.size() * min_leaf.size();
  }
};

struct GridResult {
  TrainConfig config;
  std::vector<double> fold_scores;
  double mean_score = 0.0;
};

struct GridSearchResult {
  TrainConfig best;
  std::size_t best_index = 0;
  std::vector<GridResult> table; // grid order: estimators, depth, min leaf
};

/// Exhaustive search scored by accuracy over `folds` contiguous folds; the
/// first configuration with the highest mean wins. Throws InsufficientData.
GridSearchResult grid_search(MatrixView x, std::span<const std::uint8_t> labels,
                             const TrainConfig &base, const ParamGrid &grid, std::size_t folds = 3);

} // namespace stormcast
