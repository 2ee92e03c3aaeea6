#include "stormcast/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "stormcast/error.hpp"

namespace stormcast {

using nlohmann::json;

ConfusionMatrix ConfusionMatrix::from(std::span<const std::uint8_t> predicted,
                                      std::span<const std::uint8_t> actual) {
  if (predicted.size() != actual.size()) {
    throw Error(ErrorCode::InvalidArgument, "prediction and label counts differ");
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const bool p = predicted[i] != 0;
    const bool a = actual[i] != 0;
    if (p && a) ++cm.tp;
    else if (p) ++cm.fp;
    else if (a) ++cm.fn;
    else ++cm.tn;
  }
  return cm;
}

Metrics metrics(const ConfusionMatrix &cm) noexcept {
  auto ratio = [](std::uint64_t num, std::uint64_t den) -> std::optional<double> {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
  };
  return {ratio(cm.tp + cm.tn, cm.total()), ratio(cm.tp, cm.tp + cm.fp), ratio(cm.tp, cm.tp + cm.fn),
          ratio(cm.fp, cm.fp + cm.tn)};
}

RocCurve roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) {
    throw Error(ErrorCode::InvalidArgument, "score and label counts differ");
  }
  const auto pos = static_cast<double>(std::count_if(labels.begin(), labels.end(), [](auto l) { return l != 0; }));
  const double neg = static_cast<double>(labels.size()) - pos;
  if (pos == 0.0 || neg == 0.0) {
    throw Error(ErrorCode::OneClassOnly, "ROC needs both classes");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve roc;
  roc.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  double tp = 0.0;
  double fp = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    // all rows sharing a score move the curve in one step
    for (; i < order.size() && scores[order[i]] == s; ++i) {
      (labels[order[i]] ? tp : fp) += 1.0;
    }
    const RocPoint &prev = roc.points.back();
    RocPoint p{s, fp / neg, tp / pos};
    roc.auc += (p.fpr - prev.fpr) * (p.tpr + prev.tpr) / 2.0;
    roc.points.push_back(p);
  }
  return roc;
}

double operational_projection(double recall, double fpr, double positives, double negatives) {
  if (!(recall >= 0.0 && recall <= 1.0) || !(fpr >= 0.0 && fpr <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "rates must lie in [0, 1]");
  }
  if (!(positives > 0.0) || !(negatives > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "population counts must be > 0");
  }
  const double tp = recall * positives;
  const double fp = fpr * negatives;
  if (tp + fp == 0.0) {
    throw Error(ErrorCode::DivisionByZero, "no predicted positives (recall and FPR are both 0)");
  }
  return tp / (tp + fp);
}

double required_fpr(double target_precision, double true_positives, double negatives) {
  if (!(target_precision >= 0.0 && target_precision <= 1.0) || !(true_positives >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "precision must lie in [0, 1] and TP must be >= 0");
  }
  if (target_precision == 0.0 || !(negatives > 0.0)) {
    throw Error(ErrorCode::DivisionByZero, "required FPR needs precision > 0 and N > 0");
  }
  return (1.0 - target_precision) * true_positives / (target_precision * negatives);
}

EvalReport aggregate(std::span<const FoldReport> folds) {
  EvalReport r;
  r.folds.assign(folds.begin(), folds.end());
  for (const auto &f : folds) r.overall += f.confusion;
  r.rates = metrics(r.overall);
  return r;
}

ProjectionBlock project(const Metrics &rates, double positives, double negatives,
                        double target_precision) {
  ProjectionBlock b;
  b.positives = positives;
  b.negatives = negatives;
  b.target_precision = target_precision;
  if (rates.recall && rates.fpr) {
    try {
      b.projected_precision = operational_projection(*rates.recall, *rates.fpr, positives, negatives);
    } catch (const Error &) {
      b.projected_precision.reset();
    }
  }
  if (rates.recall) {
    try {
      b.required_fpr = required_fpr(target_precision, *rates.recall * positives, negatives);
    } catch (const Error &) {
      b.required_fpr.reset();
    }
  }
  return b;
}

// ---------------------------------------------------------------------------

namespace {

json opt(const std::optional<double> &v) { return v ? json(*v) : json(nullptr); }

std::optional<double> opt_from(const json &j, const char *key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

json to_json(const ConfusionMatrix &cm) {
  return {{"tp", cm.tp}, {"fp", cm.fp}, {"tn", cm.tn}, {"fn", cm.fn}};
}

ConfusionMatrix confusion_from(const json &j) {
  return {j.at("tp").get<std::uint64_t>(), j.at("fp").get<std::uint64_t>(),
          j.at("tn").get<std::uint64_t>(), j.at("fn").get<std::uint64_t>()};
}

std::string percent(const std::optional<double> &v) {
  if (!v) return "undefined";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f %%", *v * 100.0);
  return buf;
}

} // namespace

json to_json(const Metrics &m) {
  json j{{"accuracy", opt(m.accuracy)}, {"precision", opt(m.precision)}, {"recall", opt(m.recall)},
         {"fpr", opt(m.fpr)}};
  json undefined = json::array();
  if (!m.accuracy) undefined.push_back("accuracy");
  if (!m.precision) undefined.push_back("precision");
  if (!m.recall) undefined.push_back("recall");
  if (!m.fpr) undefined.push_back("fpr");
  j["undefined"] = undefined;
  return j;
}

json to_json(const EvalReport &r) {
  json folds = json::array();
  for (const auto &f : r.folds) {
    folds.push_back({{"fold", f.fold}, {"confusion", to_json(f.confusion)}, {"metrics", to_json(f.rates)},
                     {"auc", opt(f.auc)}});
  }
  json j{{"folds", folds}, {"overall", {{"confusion", to_json(r.overall)}, {"metrics", to_json(r.rates)}}}};
  if (r.roc) {
    json pts = json::array();
    for (const auto &p : r.roc->points) {
      pts.push_back({std::isinf(p.threshold) ? json(nullptr) : json(p.threshold), p.fpr, p.tpr});
    }
    j["roc"] = {{"auc", r.roc->auc}, {"points", pts}};
  } else {
    j["roc"] = nullptr;
  }
  json imp = json::array();
  for (std::size_t i = 0; i < r.importance.size(); ++i) {
    imp.push_back({{"feature", i < r.feature_names.size() ? r.feature_names[i] : std::to_string(i)},
                   {"importance", r.importance[i]}});
  }
  j["importance"] = imp;
  if (r.projection) {
    const auto &p = *r.projection;
    j["projection"] = {{"positives", p.positives},
                       {"negatives", p.negatives},
                       {"target_precision", p.target_precision},
                       {"projected_precision", opt(p.projected_precision)},
                       {"required_fpr", opt(p.required_fpr)}};
  } else {
    j["projection"] = nullptr;
  }
  return j;
}

EvalReport eval_report_from_json(const json &j) {
  try {
    EvalReport r;
    for (const auto &f : j.at("folds")) {
      FoldReport fr;
      fr.fold = f.at("fold").get<std::size_t>();
      fr.confusion = confusion_from(f.at("confusion"));
      fr.rates = metrics(fr.confusion);
      fr.auc = opt_from(f, "auc");
      r.folds.push_back(fr);
    }
    r.overall = confusion_from(j.at("overall").at("confusion"));
    r.rates = metrics(r.overall);
    if (j.contains("roc") && !j.at("roc").is_null()) {
      RocCurve roc;
      roc.auc = j.at("roc").at("auc").get<double>();
      for (const auto &p : j.at("roc").at("points")) {
        roc.points.push_back({p.at(0).is_null() ? std::numeric_limits<double>::infinity() : p.at(0).get<double>(),
                              p.at(1).get<double>(), p.at(2).get<double>()});
      }
      r.roc = std::move(roc);
    }
    if (j.contains("importance")) {
      for (const auto &e : j.at("importance")) {
        r.feature_names.push_back(e.at("feature").get<std::string>());
        r.importance.push_back(e.at("importance").get<double>());
      }
    }
    if (j.contains("projection") && !j.at("projection").is_null()) {
      const auto &p = j.at("projection");
      ProjectionBlock b;
      b.positives = p.at("positives").get<double>();
      b.negatives = p.at("negatives").get<double>();
      b.target_precision = p.at("target_precision").get<double>();
      b.projected_precision = opt_from(p, "projected_precision");
      b.required_fpr = opt_from(p, "required_fpr");
      r.projection = b;
    }
    return r;
  } catch (const json::exception &e) {
    throw Error(ErrorCode::BadConfig, std::string("report: ") + e.what());
  }
}

void write_roc_csv(const RocCurve &roc, const std::string &path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out << "threshold,fpr,tpr\n";
  char buf[96];
  for (const auto &p : roc.points) {
    if (std::isinf(p.threshold)) {
      std::snprintf(buf, sizeof buf, "inf,%.17g,%.17g\n", p.fpr, p.tpr);
    } else {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", p.threshold, p.fpr, p.tpr);
    }
    out << buf;
  }
}

void write_importance_csv(const EvalReport &report, const std::string &path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  std::vector<std::size_t> order(report.importance.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return report.importance[a] > report.importance[b]; });
  out << "feature,importance\n";
  char buf[48];
  for (auto i : order) {
    std::snprintf(buf, sizeof buf, "%.17g", report.importance[i]);
    out << (i < report.feature_names.size() ? report.feature_names[i] : std::to_string(i)) << ',' << buf << '\n';
  }
}

std::string render_report(const EvalReport &r) {
  std::ostringstream s;
  char line[160];
  std::snprintf(line, sizeof line, "%-8s %12s %12s %10s\n", "fold", "samples", "accuracy", "AUC");
  s << line;
  for (const auto &f : r.folds) {
    const std::string auc = f.auc ? std::to_string(*f.auc).substr(0, 6) : "-";
    std::snprintf(line, sizeof line, "%-8zu %12llu %12s %10s\n", f.fold,
                  static_cast<unsigned long long>(f.confusion.total()), percent(f.rates.accuracy).c_str(),
                  auc.c_str());
    s << line;
  }
  std::snprintf(line, sizeof line, "%-8s %12llu %12s %10s\n", "overall",
                static_cast<unsigned long long>(r.overall.total()), percent(r.rates.accuracy).c_str(),
                r.roc ? std::to_string(r.roc->auc).substr(0, 6).c_str() : "-");
  s << line << '\n';
  std::snprintf(line, sizeof line, "%-8s %12s %12s %12s\n", "", "PR", "RE", "FPR");
  s << line;
  std::snprintf(line, sizeof line, "%-8s %12s %12s %12s\n", "overall", percent(r.rates.precision).c_str(),
                percent(r.rates.recall).c_str(), percent(r.rates.fpr).c_str());
  s << line;
  std::snprintf(line, sizeof line, "TP %llu  FP %llu  TN %llu  FN %llu\n",
                static_cast<unsigned long long>(r.overall.tp), static_cast<unsigned long long>(r.overall.fp),
                static_cast<unsigned long long>(r.overall.tn), static_cast<unsigned long long>(r.overall.fn));
  s << line;
  if (r.projection) {
    const auto &p = *r.projection;
    s << "\noperational projection (P = " << static_cast<unsigned long long>(p.positives)
      << ", N = " << static_cast<unsigned long long>(p.negatives) << ")\n";
    s << "  precision on all tiles: " << percent(p.projected_precision) << '\n';
    s << "  FPR for " << percent(p.target_precision) << " precision: " << percent(p.required_fpr) << '\n';
  }
  return s.str();
}

} // namespace stormcast
