#pragma once

// Temporal node embeddings: a per-snapshot matrix series, a shallow trainer
// for the composite link/node/edge objective, text and binary I/O, and kNN
// graph construction from an embedding matrix.

#include "trajviz/common.hpp"
#include "trajviz/graph.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <unordered_map>
#include <vector>

namespace trajviz {

/// Embeddings of the nodes present at one timestamp. Row r belongs to ids()[r].
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::size_t timestamp_index, std::string timestamp_label, std::vector<NodeId> ids,
                  Matrix rows);

  std::size_t timestamp_index() const noexcept { return timestamp_index_; }
  const std::string& timestamp_label() const noexcept { return timestamp_label_; }
  const std::vector<NodeId>& ids() const noexcept { return ids_; }
  const Matrix& rows() const noexcept { return rows_; }
  std::size_t size() const noexcept { return ids_.size(); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(rows_.cols()); }

  std::optional<std::size_t> row_of(NodeId id) const;
  bool contains(NodeId id) const { return row_index_.count(id) != 0; }
  /// Row of `id`; throws ValidationError when absent.
  Eigen::Ref<const Eigen::RowVectorXd> row(NodeId id) const;

  friend bool operator==(const EmbeddingMatrix& a, const EmbeddingMatrix& b) {
    return a.timestamp_index_ == b.timestamp_index_ && a.timestamp_label_ == b.timestamp_label_ &&
           a.ids_ == b.ids_ && a.rows_.rows() == b.rows_.rows() && a.rows_.cols() == b.rows_.cols() &&
           a.rows_ == b.rows_;
  }

 private:
  std::size_t timestamp_index_ = 0;
  std::string timestamp_label_;
  std::vector<NodeId> ids_;
  Matrix rows_;
  std::unordered_map<NodeId, std::size_t> row_index_;
};

struct EmbeddingSeries {
  NodeRegistry registry;
  std::vector<EmbeddingMatrix> matrices;

  std::size_t dim() const { return matrices.empty() ? 0 : matrices.front().dim(); }
  std::size_t num_snapshots() const noexcept { return matrices.size(); }

  friend bool operator==(const EmbeddingSeries&, const EmbeddingSeries&) = default;
};

struct TrainingConfig {
  std::size_t dim = 64;
  std::size_t epochs = 5;
  double learning_rate = 0.025;     // decayed linearly within each snapshot
  double min_learning_rate = 0.025 * 1e-4;
  std::size_t negatives = 5;
  std::size_t walks_per_node = 10;
  std::size_t walk_length = 20;
  std::size_t window = 5;
  double lambda_link = 1.0;
  double lambda_node = 0.0;
  double lambda_edge = 0.0;
  std::uint64_t seed = 42;
  unsigned threads = 1;

  void validate() const;  // throws UsageError
};

/// Trainable parameters for one snapshot: the embedding lookup table plus a
/// linear readout (weights, bias) used by the node-attribute term.
struct ModelParams {
  Matrix embeddings;
  Vector readout;
  double bias = 0.0;
};

// Indices below are rows of ModelParams::embeddings.
struct LinkSample {
  std::size_t center = 0;
  std::size_t context = 0;
  std::vector<std::size_t> negatives;
};

struct NodeSample {
  std::size_t node = 0;
  double target = 0.0;
};

struct EdgeSample {
  std::size_t src = 0;
  std::size_t dst = 0;
  double target = 0.0;
};

struct Minibatch {
  std::vector<LinkSample> links;
  std::vector<NodeSample> nodes;
  std::vector<EdgeSample> edges;
};

struct LossBreakdown {
  double link = 0.0;  // mean negative-sampling loss
  double node = 0.0;  // mean squared readout error
  double edge = 0.0;  // mean squared inner-product error
  double total = 0.0; // lambda-weighted sum
};

struct LossAndGrad {
  LossBreakdown loss;
  ModelParams grad;
};

/// Composite loss  lambda_link*L_link + lambda_node*L_node + lambda_edge*L_edge
/// over a minibatch, with its exact gradient.
///
///   L_link = mean over samples of  -ln s(<c,x>) - sum_n ln s(-<c,n>)
///   L_node = mean over samples of  (<w,v> + b - y)^2
///   L_edge = mean over samples of  (<v_i,v_j> - y)^2
///
/// where s is the logistic function. Empty sample groups contribute zero.
/// Throws NumericError naming the offending term if anything is non-finite.
LossAndGrad loss_and_grad(const ModelParams& params, const Minibatch& batch, const TrainingConfig& cfg);

/// Per-snapshot node attributes used as regression targets.
using NodeTargets = std::vector<std::map<NodeId, double>>;

NodeTargets node_targets_from(const DynamicGraph& g);

/// Initial vector for a node first seen at snapshot t: N(0, 1/d) entries from
/// a generator keyed on (seed, t, id).
Vector initial_embedding(std::uint64_t seed, std::size_t t, NodeId id, std::size_t dim);

/// Trains one embedding matrix per snapshot by SGD. Snapshot t > 0 starts from
/// the rows of t-1 for surviving nodes. Random walks are generated in parallel
/// when cfg.threads != 1; updates are applied sequentially, so the result is
/// identical for every thread count.
EmbeddingSeries train_series(const DynamicGraph& g, const TrainingConfig& cfg,
                             const NodeTargets* node_targets = nullptr, bool edge_targets = false);

enum class EmbeddingFormat { text, binary };

/// Writes one file per snapshot into `dir` (0000.emb / 0000.bin, ...).
std::vector<std::filesystem::path> save_embeddings(const EmbeddingSeries& series,
                                                   const std::filesystem::path& dir,
                                                   EmbeddingFormat format = EmbeddingFormat::text);

/// Loads per-snapshot files in the given order. With a graph, labels must be
/// registered there and each file's rows must match the snapshot's node set.
EmbeddingSeries load_embeddings(const std::vector<std::filesystem::path>& paths,
                                const DynamicGraph* graph = nullptr);

/// Sorted *.emb / *.bin files of a directory.
std::vector<std::filesystem::path> list_embedding_files(const std::filesystem::path& dir);

/// Directed kNN graph: i -> j for the k highest-cosine neighbours of i, weight
/// = cosine similarity. Ties go to the lower id.
Snapshot build_knn_graph(const EmbeddingMatrix& m, std::size_t k);

}  // namespace trajviz
