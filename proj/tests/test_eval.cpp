#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "oracles.hpp"
#include "stormcast/eval.hpp"
#include "temp_dir.hpp"

using namespace stormcast;

TEST_CASE("confusion counts by hand") {
  const std::vector<std::uint8_t> pred = {1, 1, 0, 0, 1, 0};
  const std::vector<std::uint8_t> act = {1, 0, 0, 1, 1, 0};
  const auto cm = ConfusionMatrix::from(pred, act);
  CHECK(cm == ConfusionMatrix{2, 1, 2, 1});
  const auto m = metrics(cm);
  CHECK(*m.accuracy == doctest::Approx(4.0 / 6));
  CHECK(*m.precision == doctest::Approx(2.0 / 3));
  CHECK(*m.recall == doctest::Approx(2.0 / 3));
  CHECK(*m.fpr == doctest::Approx(1.0 / 3));
}

TEST_CASE("rates with empty denominators are undefined") {
  const auto m = metrics(ConfusionMatrix{0, 0, 5, 0});
  CHECK_FALSE(m.precision);
  CHECK_FALSE(m.recall);
  CHECK(*m.fpr == 0.0);
  CHECK(to_json(m)["undefined"].size() == 2);
}

TEST_CASE("the gradient boosting fold counts reproduce the published rates") {
  const auto m = metrics(ConfusionMatrix{1150117, 131534, 1107016, 88433});
  CHECK(*m.precision * 100 == doctest::Approx(89.74).epsilon(5e-5));
  CHECK(*m.recall * 100 == doctest::Approx(92.86).epsilon(5e-5));
  CHECK(*m.fpr * 100 == doctest::Approx(10.62).epsilon(5e-4));
}

TEST_CASE("auc equals the pairwise ranking probability") {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> s;
    std::vector<std::uint8_t> y;
    for (int i = 0; i < 150; ++i) {
      y.push_back(static_cast<std::uint8_t>(gen() & 1));
      s.push_back(static_cast<double>(gen() % 20) / 20.0 + 0.1 * y.back());
    }
    const auto roc = roc_auc(s, y);
    CHECK(roc.auc == doctest::Approx(oracle::pairwise_auc(s, y)).epsilon(1e-12));
    CHECK(roc.points.front().fpr == 0.0);
    CHECK(roc.points.front().tpr == 0.0);
    CHECK(roc.points.back().fpr == 1.0);
    CHECK(roc.points.back().tpr == 1.0);
    for (std::size_t i = 1; i < roc.points.size(); ++i) {
      CHECK(roc.points[i].fpr >= roc.points[i - 1].fpr);
      CHECK(roc.points[i].tpr >= roc.points[i - 1].tpr);
    }
  }
}

TEST_CASE("auc of perfect, reversed and constant scores") {
  const std::vector<std::uint8_t> y = {0, 0, 1, 1};
  CHECK(roc_auc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, y).auc == 1.0);
  CHECK(roc_auc(std::vector<double>{0.9, 0.8, 0.2, 0.1}, y).auc == 0.0);
  CHECK(roc_auc(std::vector<double>{0.5, 0.5, 0.5, 0.5}, y).auc == 0.5);
  CHECK_THROWS_AS(roc_auc(std::vector<double>{0.1, 0.2}, std::vector<std::uint8_t>{1, 1}), Error);
}

TEST_CASE("operational projection and required fpr") {
  const double pr = operational_projection(0.9286, 0.1062, 1238550, 1876590909);
  CHECK(pr == doctest::Approx(0.9286 * 1238550 / (0.9286 * 1238550 + 0.1062 * 1876590909.0)));
  CHECK(required_fpr(0.2, 1238550, 1876590909) == doctest::Approx(0.8 * 1238550 / (0.2 * 1876590909.0)));
  CHECK(operational_projection(1.0, 0.0, 10, 10) == 1.0);
  CHECK_THROWS_AS(operational_projection(0.0, 0.0, 10, 10), Error);
  CHECK_THROWS_AS(operational_projection(1.5, 0.1, 10, 10), Error);
}

TEST_CASE("aggregate sums the fold matrices") {
  std::vector<FoldReport> folds(3);
  folds[0].confusion = {5, 1, 6, 2};
  folds[1].confusion = {3, 0, 4, 1};
  folds[2].confusion = {7, 2, 1, 0};
  const auto r = aggregate(folds);
  CHECK(r.overall == ConfusionMatrix{15, 3, 11, 3});
  CHECK(*r.rates.accuracy == doctest::Approx(26.0 / 32));
}

TEST_CASE("reports round-trip through json and csv") {
  TempDir dir("eval");
  std::vector<FoldReport> folds(2);
  folds[0].confusion = {5, 1, 6, 2};
  folds[0].rates = metrics(folds[0].confusion);
  folds[0].auc = 0.9;
  folds[1].confusion = {3, 0, 4, 1};
  folds[1].rates = metrics(folds[1].confusion);
  auto r = aggregate(folds);
  r.roc = roc_auc(std::vector<double>{0.1, 0.7, 0.4, 0.9}, std::vector<std::uint8_t>{0, 1, 0, 1});
  r.feature_names = {"a", "b"};
  r.importance = {0.25, 0.75};
  r.projection = project(r.rates, 100, 1000, 0.2);
  const auto back = eval_report_from_json(to_json(r));
  CHECK(back.overall == r.overall);
  CHECK(back.folds.size() == 2);
  CHECK(*back.folds[0].auc == 0.9);
  CHECK_FALSE(back.folds[1].auc);
  CHECK(back.roc->auc == r.roc->auc);
  CHECK(std::isinf(back.roc->points.front().threshold));
  CHECK(back.importance == r.importance);

  write_roc_csv(*r.roc, (dir.path / "roc.csv").string());
  write_importance_csv(r, (dir.path / "imp.csv").string());
  std::ifstream roc(dir.path / "roc.csv"), imp(dir.path / "imp.csv");
  std::string line;
  std::getline(roc, line);
  CHECK(line == "threshold,fpr,tpr");
  std::getline(roc, line);
  CHECK(line.rfind("inf,0", 0) == 0);
  std::getline(imp, line);
  std::getline(imp, line);
  CHECK(line.rfind("b,", 0) == 0);
  const auto text = render_report(r);
  CHECK(text.find("overall") != std::string::npos);
  CHECK(text.find("FPR") != std::string::npos);
}
