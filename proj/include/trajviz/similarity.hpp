#pragma once

#include "trajviz/common.hpp"

#include <optional>
#include <span>
#include <vector>

namespace trajviz {

struct SimilarityResult {
  std::vector<double> values;
  // True when v or some row had zero norm; those entries are 0.
  bool zero_norm = false;
};

/// Cosine similarity of v against every row of X, clamped to [-1, 1].
SimilarityResult cosine_similarities(const Eigen::Ref<const Eigen::RowVectorXd>& v, const Matrix& X);

/// Rows scaled to unit L2 norm. Zero rows stay zero.
Matrix normalize_rows(const Matrix& X);

/// Indices of the k largest similarities, descending. Ties go to the smaller
/// index; `exclude` (the node itself) is never returned.
std::vector<std::size_t> top_k(std::span<const double> similarities, std::size_t k,
                               std::optional<std::size_t> exclude = std::nullopt);

}  // namespace trajviz
