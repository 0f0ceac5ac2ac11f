#include "trajviz/projection.hpp"

#include "trajviz/parallel.hpp"
#include "trajviz/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace trajviz {

ProjectionMethod parse_projection_method(std::string_view name) {
  if (name == "pca") return ProjectionMethod::pca;
  if (name == "tsne" || name == "t-sne") return ProjectionMethod::tsne;
  throw UsageError("unsupported method '" + std::string(name) + "' (supported: pca, tsne)");
}

std::string to_string(ProjectionMethod m) { return m == ProjectionMethod::pca ? "pca" : "tsne"; }

nlohmann::json ProjectionConfig::to_json() const {
  nlohmann::json j;
  j["method"] = to_string(method);
  if (method == ProjectionMethod::tsne) {
    j["perplexity"] = tsne.perplexity;
    j["iterations"] = tsne.iterations;
    j["early_exaggeration"] = tsne.early_exaggeration;
    j["early_exaggeration_iters"] = tsne.early_exaggeration_iters;
    j["learning_rate"] = tsne.learning_rate;
    j["initial_momentum"] = tsne.initial_momentum;
    j["final_momentum"] = tsne.final_momentum;
    j["momentum_switch_iter"] = tsne.momentum_switch_iter;
    j["seed"] = tsne.seed;
  }
  return j;
}

std::string ProjectionConfig::fingerprint() const { return hex64(fnv1a64(to_json().dump())); }

// ---------------------------------------------------------------------------
// PCA

SymmetricEigen jacobi_eigen(const Eigen::MatrixXd& symmetric, double tolerance, std::size_t max_sweeps) {
  const Eigen::Index n = symmetric.rows();
  if (symmetric.cols() != n) throw ValidationError("jacobi_eigen: matrix must be square");
  Eigen::MatrixXd A = 0.5 * (symmetric + symmetric.transpose());
  Eigen::MatrixXd V = Eigen::MatrixXd::Identity(n, n);
  const double scale = A.squaredNorm();

  bool converged = false;
  for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += A(p, q) * A(p, q);
    if (off <= tolerance * tolerance * scale || off == 0.0) {
      converged = true;
      break;
    }
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = A(p, q);
        if (apq == 0.0) continue;
        const double theta = (A(q, q) - A(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = A(k, p), akq = A(k, q);
          A(k, p) = c * akp - s * akq;
          A(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = A(p, k), aqk = A(q, k);
          A(p, k) = c * apk - s * aqk;
          A(q, k) = s * apk + c * aqk;
        }
        A(p, q) = A(q, p) = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = V(k, p), vkq = V(k, q);
          V(k, p) = c * vkp - s * vkq;
          V(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  if (!converged) throw NumericError("projection", "jacobi_eigen", "no convergence");

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return A(a, a) > A(b, b); });
  SymmetricEigen out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    out.values[k] = A(order[static_cast<std::size_t>(k)], order[static_cast<std::size_t>(k)]);
    out.vectors.col(k) = V.col(order[static_cast<std::size_t>(k)]);
  }
  return out;
}

Projection2D pca_project(const Matrix& X) {
  if (X.rows() < 3 || X.cols() < 2) throw ValidationError("pca_project: need N >= 3 rows and d >= 2 columns");
  if (!X.allFinite()) throw ValidationError("pca_project: non-finite input");
  const Eigen::RowVectorXd mean = X.colwise().mean();
  const Eigen::MatrixXd centered = X.rowwise() - mean;
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(X.rows() - 1);

  auto eig = jacobi_eigen(cov);
  const double magnitude = std::max(1.0, X.cwiseAbs().maxCoeff());
  if (eig.values[0] <= 1e-24 * magnitude * magnitude)
    throw NumericError("projection", "pca_project", "degenerate covariance");

  Eigen::MatrixXd axes = eig.vectors.leftCols(2);
  for (Eigen::Index c = 0; c < 2; ++c) {
    Eigen::Index arg = 0;
    for (Eigen::Index r = 1; r < axes.rows(); ++r)
      if (std::abs(axes(r, c)) > std::abs(axes(arg, c))) arg = r;
    if (axes(arg, c) < 0) axes.col(c) *= -1.0;
  }

  Projection2D out;
  out.coords = centered * axes;
  out.method = "pca";
  ProjectionConfig cfg;
  cfg.method = ProjectionMethod::pca;
  out.fingerprint = cfg.fingerprint();
  for (Eigen::Index c = 0; c < 2; ++c)
    out.explained_variance.push_back(out.coords.col(c).squaredNorm() / static_cast<double>(X.rows() - 1));
  return out;
}

// ---------------------------------------------------------------------------
// t-SNE

namespace {

Matrix squared_distances(const Matrix& X) {
  const Vector norms = X.rowwise().squaredNorm();
  Matrix D = (-2.0 * X * X.transpose()).colwise() + norms;
  D.rowwise() += norms.transpose();
  for (Eigen::Index i = 0; i < D.rows(); ++i) {
    D(i, i) = 0.0;
    for (Eigen::Index j = 0; j < D.cols(); ++j) D(i, j) = std::max(D(i, j), 0.0);
  }
  return D;
}

constexpr double kLn2 = 0.69314718055994530942;

}  // namespace

double row_perplexity(const Eigen::Ref<const Eigen::RowVectorXd>& row, std::size_t self) {
  double h = 0.0;
  for (Eigen::Index j = 0; j < row.size(); ++j) {
    if (static_cast<std::size_t>(j) == self) continue;
    const double p = row[j];
    if (p > 0.0) h -= p * std::log2(p);
  }
  return std::exp2(h);
}

Matrix conditional_affinities(const Matrix& X, double perplexity) {
  const Eigen::Index n = X.rows();
  if (n < 2) throw ValidationError("conditional_affinities: need at least 2 points");
  if (!(perplexity > 0)) throw UsageError("conditional_affinities: perplexity must be positive");
  const Matrix D = squared_distances(X);
  const double target = std::log(perplexity);  // nats
  Matrix P = Matrix::Zero(n, n);
  std::vector<double> gap(static_cast<std::size_t>(n), 0.0);

  parallel_for(static_cast<std::size_t>(n), 1, [&](std::size_t ui) {
    const auto i = static_cast<Eigen::Index>(ui);
    double dmin = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) dmin = std::min(dmin, D(i, j));

    double beta = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
    double diff = 0.0;
    for (int step = 0; step < 200; ++step) {
      double sum = 0.0, weighted = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        const double shifted = D(i, j) - dmin;
        const double p = std::exp(-beta * shifted);
        P(i, j) = p;
        sum += p;
        weighted += p * shifted;
      }
      const double entropy = std::log(sum) + beta * weighted / sum;
      P.row(i) /= sum;
      diff = entropy - target;
      if (std::abs(diff) < 1e-12) break;
      if (diff > 0) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
      } else {
        hi = beta;
        beta = 0.5 * (beta + lo);
      }
    }
    gap[ui] = std::abs(diff) / kLn2;
  });

  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(gap[static_cast<std::size_t>(i)] <= 1e-5))
      throw NumericError("projection", "tsne_project",
                         "non-convergent sigma search for point " + std::to_string(i) +
                             " after 200 bisection steps");
  }
  return P;
}

Matrix joint_affinities(const Matrix& conditional) {
  const double n = static_cast<double>(conditional.rows());
  Matrix P = (conditional + conditional.transpose()) / (2.0 * n);
  return P;
}

double effective_perplexity(std::size_t n, double requested) {
  return std::min(requested, (static_cast<double>(n) - 1.0) / 3.0);
}

Projection2D tsne_project(const Matrix& X, const TsneConfig& cfg) {
  const auto n = static_cast<std::size_t>(X.rows());
  if (n < 10) throw ValidationError("tsne_project: need at least 10 points");
  if (!X.allFinite()) throw ValidationError("tsne_project: non-finite input");
  const double perplexity = effective_perplexity(n, cfg.perplexity);
  if (perplexity < 2.0) throw UsageError("tsne_project: perplexity must be >= 2 after clamping");
  if (cfg.iterations < cfg.early_exaggeration_iters)
    throw UsageError("tsne_project: iterations must be >= early_exaggeration_iters");

  const Matrix P = joint_affinities(conditional_affinities(X, perplexity));
  const double lr = cfg.learning_rate > 0 ? cfg.learning_rate : std::max(static_cast<double>(n) / 12.0, 50.0);
  const auto N = static_cast<Eigen::Index>(n);

  SplitMix64 rng{cfg.seed, 0x75e7ULL};
  Matrix Y(N, 2);
  for (Eigen::Index i = 0; i < N; ++i)
    for (Eigen::Index c = 0; c < 2; ++c) Y(i, c) = 1e-4 * rng.normal();

  Matrix update = Matrix::Zero(N, 2);
  Matrix gains = Matrix::Ones(N, 2);
  Matrix grad(N, 2);
  std::vector<double> row_z(n);

  auto kernel = [&](Eigen::Index i, Eigen::Index j) {
    const double dx = Y(i, 0) - Y(j, 0), dy = Y(i, 1) - Y(j, 1);
    return 1.0 / (1.0 + dx * dx + dy * dy);
  };
  auto normalizer = [&] {
    parallel_for(n, cfg.threads, [&](std::size_t ui) {
      const auto i = static_cast<Eigen::Index>(ui);
      double s = 0.0;
      for (Eigen::Index j = 0; j < N; ++j)
        if (j != i) s += kernel(i, j);
      row_z[ui] = s;
    });
    return std::accumulate(row_z.begin(), row_z.end(), 0.0);
  };

  Projection2D out;
  for (std::size_t iter = 0; iter < cfg.iterations; ++iter) {
    const double exaggeration = iter < cfg.early_exaggeration_iters ? cfg.early_exaggeration : 1.0;
    const double momentum = iter < cfg.momentum_switch_iter ? cfg.initial_momentum : cfg.final_momentum;
    const double Z = normalizer();

    parallel_for(n, cfg.threads, [&](std::size_t ui) {
      const auto i = static_cast<Eigen::Index>(ui);
      double gx = 0.0, gy = 0.0;
      for (Eigen::Index j = 0; j < N; ++j) {
        if (j == i) continue;
        const double num = kernel(i, j);
        const double q = std::max(num / Z, 1e-12);
        const double coeff = (exaggeration * P(i, j) - q) * num;
        gx += coeff * (Y(i, 0) - Y(j, 0));
        gy += coeff * (Y(i, 1) - Y(j, 1));
      }
      grad(i, 0) = 4.0 * gx;
      grad(i, 1) = 4.0 * gy;
    });

    for (Eigen::Index i = 0; i < N; ++i) {
      for (Eigen::Index c = 0; c < 2; ++c) {
        const bool same_sign = (grad(i, c) > 0) == (update(i, c) > 0);
        gains(i, c) = same_sign ? gains(i, c) * 0.8 : gains(i, c) + 0.2;
        gains(i, c) = std::max(gains(i, c), 0.01);
        update(i, c) = momentum * update(i, c) - lr * gains(i, c) * grad(i, c);
        Y(i, c) += update(i, c);
      }
    }
    Y.rowwise() -= Y.colwise().mean();
    if (!Y.allFinite()) throw NumericError("projection", "tsne_project", "non-finite coordinates at iteration " + std::to_string(iter));

    if ((iter + 1) % 10 == 0) {
      const double Zk = normalizer();
      double kl = 0.0;
      for (Eigen::Index i = 0; i < N; ++i)
        for (Eigen::Index j = 0; j < N; ++j) {
          if (i == j || P(i, j) <= 0.0) continue;
          const double q = std::max(kernel(i, j) / Zk, 1e-12);
          kl += P(i, j) * std::log(P(i, j) / q);
        }
      out.kl_history.emplace_back(iter + 1, kl);
    }
  }

  out.coords = std::move(Y);
  out.method = "tsne";
  ProjectionConfig pc;
  pc.method = ProjectionMethod::tsne;
  pc.tsne = cfg;
  out.fingerprint = pc.fingerprint();
  return out;
}

Projection2D project(const Matrix& X, const ProjectionConfig& cfg) {
  switch (cfg.method) {
    case ProjectionMethod::pca: return pca_project(X);
    case ProjectionMethod::tsne: return tsne_project(X, cfg.tsne);
  }
  throw UsageError("unsupported method");
}

}  // namespace trajviz
