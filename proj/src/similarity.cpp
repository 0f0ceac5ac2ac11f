#include "trajviz/similarity.hpp"

#include <algorithm>
#include <numeric>

namespace trajviz {

SimilarityResult cosine_similarities(const Eigen::Ref<const Eigen::RowVectorXd>& v, const Matrix& X) {
  SimilarityResult out;
  out.values.assign(static_cast<std::size_t>(X.rows()), 0.0);
  const double vn = v.norm();
  if (vn == 0.0) {
    out.zero_norm = true;
    return out;
  }
  for (Eigen::Index j = 0; j < X.rows(); ++j) {
    const double xn = X.row(j).norm();
    if (xn == 0.0) {
      out.zero_norm = true;
      continue;
    }
    const double s = v.dot(X.row(j)) / (vn * xn);
    out.values[static_cast<std::size_t>(j)] = std::clamp(s, -1.0, 1.0);
  }
  return out;
}

Matrix normalize_rows(const Matrix& X) {
  Matrix out = X;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double n = out.row(i).norm();
    if (n > 0.0) out.row(i) /= n;
  }
  return out;
}

std::vector<std::size_t> top_k(std::span<const double> similarities, std::size_t k,
                               std::optional<std::size_t> exclude) {
  const std::size_t available = similarities.size() - (exclude && *exclude < similarities.size() ? 1 : 0);
  if (k == 0 || k > available) {
    throw UsageError("k=" + std::to_string(k) + " out of range (" + std::to_string(available) +
                     " candidates)");
  }
  std::vector<std::size_t> idx;
  idx.reserve(similarities.size());
  for (std::size_t j = 0; j < similarities.size(); ++j)
    if (!exclude || j != *exclude) idx.push_back(j);
  auto better = [&](std::size_t a, std::size_t b) {
    if (similarities[a] != similarities[b]) return similarities[a] > similarities[b];
    return a < b;
  };
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), better);
  idx.resize(k);
  return idx;
}

}  // namespace trajviz
