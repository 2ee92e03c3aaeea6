#pragma once

#include <cstdint>
#include <span>

#include "stormcast/models.hpp"

namespace stormcast::detail {

enum class Criterion { Gini, FriedmanMse };

struct GrowParams {
  Criterion criterion = Criterion::Gini;
  int max_depth = 12;
  std::size_t min_leaf = 1;
  std::size_t max_features = 0; // 0 = all
  std::uint64_t seed = 0;       // feature subsampling
};

/// Grows a tree on the rows with positive weight. Targets are 0/1 for gini,
/// real-valued for Friedman MSE; leaf values are weighted target means.
Tree grow_tree(MatrixView x, std::span<const double> y, std::span<const double> w,
               const GrowParams &params);

std::size_t resolve_max_features(const TrainConfig &config, std::size_t n_features);

void check_training(MatrixView x, std::span<const std::uint8_t> labels);

} // namespace stormcast::detail
