#pragma once

// Structural-change metrics over an embedding series (or its 2-D
// trajectories): Jaccard_n and rank-biased overlap of each node's nearest
// neighbours across adjacent timestamps, average rank change (ARC / NARC),
// L1/L2 movement, and macro-level RBO.
//
// For a transition (t-1, t) every ranking is restricted to the common node
// set V^{t-1} ∩ V^t, so ranks at both ends refer to the same candidates.

#include "trajviz/common.hpp"
#include "trajviz/embedding.hpp"
#include "trajviz/trajectory.hpp"

#include <nlohmann/json.hpp>

#include <span>
#include <vector>

namespace trajviz {

enum class NeighborSpace { raw_embedding, projected_2d };
enum class MovementVariant { raw, unit_normalized, projected };

NeighborSpace parse_neighbor_space(std::string_view s);
MovementVariant parse_movement_variant(std::string_view s);
std::string to_string(NeighborSpace s);
std::string to_string(MovementVariant v);

struct MetricConfig {
  std::size_t n = 10;  // Jaccard depth
  std::size_t m = 10;  // RBO depth
  double p = 0.9;      // RBO damping
  NeighborSpace space = NeighborSpace::raw_embedding;
  MovementVariant movement = MovementVariant::raw;
  unsigned threads = 1;

  void validate() const;  // throws UsageError
  nlohmann::json to_json() const;
  std::string fingerprint() const;
};

/// Per-timestamp point sets with a proximity score. Embedding rows are ranked
/// by cosine similarity, 2-D positions by (negated) Euclidean distance.
class PointSeries {
 public:
  enum class Metric { cosine, euclidean };

  static PointSeries from_embeddings(const EmbeddingSeries& series, bool unit_normalize = false);
  static PointSeries from_trajectories(const TrajectorySet& trajectories);

  std::size_t num_snapshots() const noexcept { return ids_.size(); }
  const std::vector<NodeId>& ids(std::size_t t) const { return ids_.at(t); }  // ascending
  bool contains(NodeId id, std::size_t t) const;
  Eigen::Ref<const Eigen::RowVectorXd> point(NodeId id, std::size_t t) const;
  Metric metric() const noexcept { return metric_; }
  const std::vector<std::string>& labels() const noexcept { return labels_; }

  /// Larger is closer: cosine similarity, or minus the squared distance.
  double proximity(std::size_t t, NodeId a, NodeId b) const;

  /// Ids present at both t-1 and t.
  std::vector<NodeId> common(std::size_t t) const;

 private:
  Metric metric_ = Metric::cosine;
  std::vector<std::string> labels_;
  std::vector<std::vector<NodeId>> ids_;
  std::vector<Matrix> points_;  // rows follow ids_[t]
};

struct RankedNeighborList {
  NodeId owner = 0;
  std::size_t timestamp_index = 0;
  std::vector<NodeId> neighbors;  // closest first, ties by ascending id
};

/// The `depth` closest nodes to i at t among `candidates` (all of V^t when
/// empty). Throws when i is absent or depth exceeds the candidate count.
RankedNeighborList ranked_neighbors(const PointSeries& points, NodeId i, std::size_t t, std::size_t depth,
                                    std::span<const NodeId> candidates = {});

// List-level primitives.
double jaccard_index(std::span<const NodeId> a, std::span<const NodeId> b);

struct RboValue {
  double raw = 0.0;
  double normalized = 0.0;
};
/// (1-p) * sum_{d=1..m} p^{d-1} |A_{:d} ∩ B_{:d}| / d, and that divided by 1 - p^m.
RboValue rank_biased_overlap(std::span<const NodeId> a, std::span<const NodeId> b, std::size_t m, double p);

/// Mean absolute rank change between two full rankings of the same candidates
/// (excluding the owner), divided by `common_size` (owner term counts as 0).
double average_rank_change(std::span<const NodeId> before, std::span<const NodeId> after, std::size_t common_size);

// Node-level metrics for the transition (t-1, t); t >= 1.
double jaccard_n(const PointSeries& points, NodeId i, std::size_t t, std::size_t n);
RboValue rbo(const PointSeries& points, NodeId i, std::size_t m, std::size_t t, double p);
double arc(const PointSeries& points, NodeId i, std::size_t t);

double narc(const PointSeries& points);
RboValue macro_rbo(const PointSeries& points, std::size_t m, double p);

struct NodeMovement {
  NodeId node = 0;
  std::size_t t = 0;
  double l1 = 0.0;
  double l2 = 0.0;
};

struct MovementResult {
  double l1 = 0.0;
  double l2 = 0.0;
  std::vector<NodeMovement> per_node;  // ordered by (t, node)
};

/// Mean over transitions of the mean over common nodes of ||h^t - h^{t-1}||_p.
/// Transitions with no common node are skipped.
MovementResult movement_lp(const PointSeries& points);

/// Movement for a variant: raw or unit-normalised embedding rows, or projected
/// 2-D positions (which require `trajectories`).
MovementResult movement_lp(const EmbeddingSeries& series, const TrajectorySet* trajectories, MovementVariant variant);

struct NodeTransitionMetrics {
  NodeId node = 0;
  std::size_t t = 0;
  double jaccard = 0.0;
  double rbo_raw = 0.0;
  double rbo_normalized = 0.0;
  double arc = 0.0;
  double l1 = 0.0;
  double l2 = 0.0;
};

struct MetricReport {
  std::vector<std::string> labels;
  std::vector<NodeTransitionMetrics> rows;  // ordered by (t, node)
  double narc = 0.0;
  double macro_rbo_raw = 0.0;
  double macro_rbo_normalized = 0.0;
  double l1 = 0.0;
  double l2 = 0.0;
  std::size_t transitions = 0;
  MetricConfig config;

  nlohmann::json summary_json() const;
};

/// All metrics in one pass. `trajectories` is needed for the projected
/// neighbour space or the projected movement variant.
MetricReport compute_report(const EmbeddingSeries& series, const TrajectorySet* trajectories, const MetricConfig& cfg);

}  // namespace trajviz
