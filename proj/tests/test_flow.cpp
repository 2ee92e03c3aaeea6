#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "stormcast/flow.hpp"

using namespace stormcast;

namespace {

double mean_epe(const FlowField &f, double u, double v) {
  double sum = 0.0;
  for (std::size_t i = 0; i < f.u.size(); ++i) sum += std::hypot(f.u[i] - u, f.v[i] - v);
  return sum / static_cast<double>(f.u.size());
}

} // namespace

TEST_CASE("a pure translation is recovered") {
  const auto a = oracle::textured(48, 48, 0, 0);
  const auto b = oracle::textured(48, 48, 1, 1);
  CHECK(mean_epe(compute_flow(a, b), 1.0, 1.0) < 0.25);
}

TEST_CASE("identical frames give zero flow and zero error") {
  const auto a = oracle::textured(32, 32, 0, 0);
  const auto f = compute_flow(a, a);
  CHECK(mean_epe(f, 0.0, 0.0) < 1e-3);
  auto b = a;
  b.timestamp += kWindowLength;
  const auto pred = predict_next(a, b);
  auto c = b;
  c.timestamp += kWindowLength;
  const auto err = error_field(c, pred);
  for (float e : err.values) CHECK(e < 1e-3f);
}

TEST_CASE("warp with a constant field shifts the image") {
  const auto a = oracle::textured(32, 32, 0, 0);
  FlowField f{a.geometry, std::vector<float>(a.values.size(), 2.0f), std::vector<float>(a.values.size(), 0.0f)};
  const auto w = warp(a, f);
  for (int y = 0; y < 32; ++y) {
    for (int x = 2; x < 32; ++x) CHECK(w.at(x, y) == doctest::Approx(a.at(x - 2, y)));
  }
  for (int y = 0; y < 32; ++y) CHECK(w.at(0, y) == doctest::Approx(a.at(0, y)));
}

TEST_CASE("prediction needs frames 15 minutes apart") {
  const auto a = oracle::textured(16, 16, 0, 0);
  auto b = a;
  b.timestamp += Minutes{30};
  CHECK_THROWS_AS(predict_next(a, b), Error);
}

TEST_CASE("error field checks geometry and time") {
  const auto a = oracle::textured(16, 16, 0, 0);
  const auto b = oracle::textured(17, 16, 0, 0);
  CHECK_THROWS_AS(error_field(a, b), Error);
  auto c = a;
  c.timestamp += Minutes{15};
  CHECK_THROWS_AS(error_field(a, c), Error);
  auto d = a;
  d.values[3] += 4.0f;
  CHECK(error_field(d, a).values[3] == doctest::Approx(4.0));
}

TEST_CASE("pyramid depth stops at small frames") {
  FlowParams p;
  CHECK(effective_scales(64, 64, p) == 5);
  CHECK(effective_scales(4, 4, p) == 1);
  CHECK(effective_scales(1000, 1000, p) == 7);
}

TEST_CASE("flow parameters are validated") {
  FlowParams p;
  p.tau = 0.0;
  CHECK_THROWS_AS(p.validate(), Error);
  p = {};
  p.median_filtering = 2;
  CHECK_THROWS_AS(p.validate(), Error);
  CHECK_NOTHROW(FlowParams{}.validate());
}
