#pragma once

// Projection of d-dimensional anchor embeddings to 2-D: PCA and exact t-SNE.

#include "trajviz/common.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace trajviz {

enum class ProjectionMethod { pca, tsne };

ProjectionMethod parse_projection_method(std::string_view name);  // throws UsageError
std::string to_string(ProjectionMethod m);

struct TsneConfig {
  double perplexity = 30.0;
  std::size_t iterations = 1000;
  double early_exaggeration = 12.0;
  std::size_t early_exaggeration_iters = 250;
  double learning_rate = 0.0;  // 0 selects max(N / 12, 50)
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  std::size_t momentum_switch_iter = 250;
  std::uint64_t seed = 42;
  unsigned threads = 1;
};

struct ProjectionConfig {
  ProjectionMethod method = ProjectionMethod::tsne;
  TsneConfig tsne;

  nlohmann::json to_json() const;
  std::string fingerprint() const;  // hash of to_json(); threads excluded
};

struct Projection2D {
  Matrix coords;  // N x 2, row i projects input row i
  std::string method;
  std::string fingerprint;
  std::vector<double> explained_variance;     // PCA: variance of each output column
  std::vector<std::pair<std::size_t, double>> kl_history;  // t-SNE: (iteration, KL) every 10 iterations
};

/// Symmetric eigendecomposition by cyclic Jacobi rotations. Eigenvalues are
/// returned in non-increasing order with matching eigenvector columns.
struct SymmetricEigen {
  Vector values;
  Eigen::MatrixXd vectors;
};
SymmetricEigen jacobi_eigen(const Eigen::MatrixXd& symmetric, double tolerance = 1e-14,
                            std::size_t max_sweeps = 100);

/// Projects mean-centred X onto the top two eigenvectors of its sample
/// covariance. Each eigenvector's largest-magnitude entry is made positive.
Projection2D pca_project(const Matrix& X);

/// Row-conditional affinities P_{j|i} with per-point precision found by
/// bisection so that each row's perplexity matches `perplexity`.
/// Throws NumericError if a row does not converge within 200 steps.
Matrix conditional_affinities(const Matrix& X, double perplexity);

/// Symmetrised joint affinities (P + P^T) / 2N.
Matrix joint_affinities(const Matrix& conditional);

/// Perplexity 2^H of a probability row, excluding the diagonal entry `self`.
double row_perplexity(const Eigen::Ref<const Eigen::RowVectorXd>& row, std::size_t self);

/// Effective perplexity after clamping to (N - 1) / 3.
double effective_perplexity(std::size_t n, double requested);

/// Exact O(N^2) t-SNE.
Projection2D tsne_project(const Matrix& X, const TsneConfig& cfg);

Projection2D project(const Matrix& X, const ProjectionConfig& cfg);

}  // namespace trajviz
