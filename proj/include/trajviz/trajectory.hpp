#pragma once

// Cross-time alignment. A fixed set of anchor nodes is projected once; at
// every timestamp each node is placed by aggregating the projected positions
// of its most similar anchors, so all snapshots share one 2-D frame.

#include "trajviz/common.hpp"
#include "trajviz/embedding.hpp"
#include "trajviz/graph.hpp"
#include "trajviz/projection.hpp"
#include "trajviz/similarity.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace trajviz {

enum class Aggregation { mean, similarity_softmax };
enum class AnchorStrategy { all_v0, top_degree, random };

Aggregation parse_aggregation(std::string_view s);
AnchorStrategy parse_anchor_strategy(std::string_view s);
std::string to_string(Aggregation a);
std::string to_string(AnchorStrategy s);

inline constexpr std::size_t kDefaultAnchorCap = 5000;

struct AlignmentConfig {
  std::size_t k = 10;
  double alpha = 0.3;
  Aggregation aggregation = Aggregation::similarity_softmax;
  double tau = 0.1;
  // Unset strategy: all_v0 when |V^0| <= kDefaultAnchorCap, else top_degree.
  std::optional<AnchorStrategy> anchor_strategy;
  std::size_t anchor_cap = kDefaultAnchorCap;
  std::uint64_t anchor_seed = 42;
  std::size_t reference_t = 0;
  unsigned threads = 1;

  void validate() const;  // throws UsageError
  nlohmann::json to_json() const;
  std::string fingerprint() const;
};

struct AnchorSet {
  std::vector<NodeId> ids;  // ascending
  std::size_t reference_t = 0;
  Matrix X;                 // reference embeddings, row r for ids[r]
  Matrix Z;                 // 2-D projection of X
  std::string projection_method;
  std::string projection_fingerprint;

  std::optional<std::size_t> index_of(NodeId id) const;
  std::string fingerprint() const;
};

using Point2 = std::array<double, 2>;

struct TrajectoryPoint {
  std::size_t t = 0;
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const TrajectoryPoint&, const TrajectoryPoint&) = default;
};

struct AnchorPosition {
  std::string label;
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const AnchorPosition&, const AnchorPosition&) = default;
};

struct TrajectoryMeta {
  std::string method;
  std::size_t k = 0;
  double alpha = 0.0;
  std::string aggregation;
  std::size_t anchor_count = 0;
  std::size_t reference_t = 0;
  std::string anchor_fingerprint;
  std::string config_fingerprint;
  std::vector<std::string> timestamp_labels;
  std::vector<std::string> warnings;

  friend bool operator==(const TrajectoryMeta&, const TrajectoryMeta&) = default;
};

struct TrajectorySet {
  TrajectoryMeta meta;
  std::vector<std::string> labels;                 // indexed by NodeId
  std::vector<std::vector<TrajectoryPoint>> points;  // indexed by NodeId, ascending t
  std::vector<AnchorPosition> anchors;             // static anchor frame Z

  std::size_t num_points() const;
  /// Position of node `id` at timestamp t, if present.
  std::optional<Point2> at(NodeId id, std::size_t t) const;

  friend bool operator==(const TrajectorySet&, const TrajectorySet&) = default;
};

AnchorSet select_anchors(const DynamicGraph& g, const EmbeddingSeries& series, const AlignmentConfig& cfg,
                         const ProjectionConfig& projection);

/// Builds an anchor set from explicit ids and a precomputed projection.
AnchorSet make_anchor_set(const EmbeddingSeries& series, std::vector<NodeId> ids, std::size_t reference_t,
                          const Matrix& Z, std::string method = "given");

/// Indices of the k most similar anchors, most similar first. Ties go to the
/// lower anchor id; `self` is excluded.
std::vector<std::size_t> knn_anchors(std::span<const double> similarities, std::size_t k,
                                     std::optional<std::size_t> self = std::nullopt);

Point2 aggregate(std::span<const std::size_t> neighbors, std::span<const double> similarities, const Matrix& Z,
                 Aggregation mode, double tau);

Point2 interpolate(const std::optional<Point2>& z_static, const Point2& z_agg, double alpha, bool is_anchor);

TrajectorySet compute_trajectories(const DynamicGraph& g, const EmbeddingSeries& series, const AnchorSet& anchors,
                                   const AlignmentConfig& cfg);

struct ProcrustesResult {
  Eigen::MatrixXd rotation;
  double residual = 0.0;
};

/// Orthogonal R minimising ||A R - B||_F, from the SVD of A^T B.
ProcrustesResult procrustes_align(const Matrix& A, const Matrix& B);

nlohmann::json to_json(const TrajectorySet& set);
TrajectorySet trajectories_from_json(const nlohmann::json& j);

}  // namespace trajviz
