#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace stormcast {

struct ConfusionMatrix {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const noexcept { return tp + fp + tn + fn; }
  ConfusionMatrix &operator+=(const ConfusionMatrix &o) noexcept {
    tp += o.tp;
    fp += o.fp;
    tn += o.tn;
    fn += o.fn;
    return *this;
  }
  friend bool operator==(const ConfusionMatrix &, const ConfusionMatrix &) = default;

  /// Counts predictions against labels; both are 0/1.
  static ConfusionMatrix from(std::span<const std::uint8_t> predicted,
                              std::span<const std::uint8_t> actual);
};

/// Rates are empty when their denominator is zero.
struct Metrics {
  std::optional<double> accuracy;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> fpr;
};

Metrics metrics(const ConfusionMatrix &cm) noexcept;

struct RocPoint {
  double threshold = 0.0; // score >= threshold is predicted positive; +inf for the origin
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points; // from (0, 0) to (1, 1)
  double auc = 0.0;
};

/// One ROC step per distinct score, trapezoid AUC. Throws OneClassOnly.
RocCurve roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

/// Precision when the rates hold on a population with `positives` and
/// `negatives`: RE P / (RE P + FPR N). Throws DivisionByZero, InvalidArgument.
double operational_projection(double recall, double fpr, double positives, double negatives);

/// FPR needed for a target precision: (1 - PR) TP / (PR N).
double required_fpr(double target_precision, double true_positives, double negatives);

struct FoldReport {
  std::size_t fold = 0;
  ConfusionMatrix confusion;
  Metrics rates;
  std::optional<double> auc;
};

struct ProjectionBlock {
  double positives = 0.0;
  double negatives = 0.0;
  double target_precision = 0.2;
  std::optional<double> projected_precision;
  std::optional<double> required_fpr; // assuming the measured recall
};

struct EvalReport {
  std::vector<FoldReport> folds;
  ConfusionMatrix overall;
  Metrics rates;
  std::optional<RocCurve> roc; // over the pooled test scores
  std::vector<std::string> feature_names;
  std::vector<double> importance; // empty for models without gini importance
  std::optional<ProjectionBlock> projection;
};

/// Sums the fold confusion matrices and derives the overall rates from the sums.
EvalReport aggregate(std::span<const FoldReport> folds);

/// Fills projected precision and required FPR from the overall rates.
ProjectionBlock project(const Metrics &rates, double positives, double negatives,
                        double target_precision);

nlohmann::json to_json(const Metrics &m);
nlohmann::json to_json(const EvalReport &report);
EvalReport eval_report_from_json(const nlohmann::json &j);

/// `threshold,fpr,tpr` rows.
void write_roc_csv(const RocCurve &roc, const std::string &path);
/// `feature,importance` rows, sorted by decreasing importance.
void write_importance_csv(const EvalReport &report, const std::string &path);

/// Plain-text summary: accuracy per fold, then PR / RE / FPR overall.
std::string render_report(const EvalReport &report);

} // namespace stormcast
