#pragma once

// Discrete-time dynamic graphs: a global node registry plus an ordered list of
// snapshots. Also ingestion from edge-list files and from timestamped event
// logs.

#include "trajviz/common.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace trajviz {

/// Bijection between external string labels and dense ids [0, size()).
class NodeRegistry {
 public:
  /// Returns the id for `label`, registering it if unseen.
  NodeId intern(std::string_view label);
  std::optional<NodeId> find(std::string_view label) const;
  NodeId at(std::string_view label) const;  // throws ValidationError if unknown
  const std::string& label(NodeId id) const { return labels_.at(id); }
  std::size_t size() const noexcept { return labels_.size(); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }

  friend bool operator==(const NodeRegistry& a, const NodeRegistry& b) {
    return a.labels_ == b.labels_;
  }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, NodeId> index_;
};

struct Edge {
  NodeId src = 0;
  NodeId dst = 0;
  double weight = 1.0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

struct Snapshot {
  std::size_t timestamp_index = 0;
  std::string timestamp_label;
  std::vector<Edge> edges;      // sorted by (src, dst), unique
  std::vector<NodeId> nodes;    // sorted, unique; the node mask V^t
  std::map<NodeId, double> node_attributes;  // optional per-node real value

  bool contains(NodeId id) const;

  friend bool operator==(const Snapshot&, const Snapshot&) = default;
};

struct DynamicGraph {
  NodeRegistry registry;
  std::vector<Snapshot> snapshots;
  bool directed = false;

  std::size_t num_snapshots() const noexcept { return snapshots.size(); }

  friend bool operator==(const DynamicGraph&, const DynamicGraph&) = default;
};

enum class EventKind { add_node, del_node, add_edge, del_edge };

struct Event {
  double time = 0.0;
  EventKind kind = EventKind::add_node;
  std::string src;
  std::string dst;  // edge events only
  double weight = 1.0;
};

struct EventLog {
  std::vector<Event> events;
};

/// One edge-list file and the timestamp label it is ordered by.
struct SnapshotSource {
  std::filesystem::path path;
  std::string timestamp_label;
  std::optional<std::filesystem::path> node_attributes;  // `label<TAB>value` rows
};

struct ParseResult {
  DynamicGraph graph;
  std::size_t self_loops_dropped = 0;
  std::vector<std::string> warnings;
};

/// Orders timestamp labels: numerically when both parse as numbers, else
/// by "natural" order (digit runs compared as integers).
bool timestamp_label_less(std::string_view a, std::string_view b);

/// Parses edge-list files into a DynamicGraph. Labels are taken from the file
/// stems. Snapshots are ordered by label. Duplicate rows are summed and self
/// loops dropped (counted in the result).
ParseResult parse_snapshots(const std::vector<std::filesystem::path>& paths, bool directed,
                            unsigned threads = 1);
ParseResult parse_snapshots(std::vector<SnapshotSource> sources, bool directed,
                            unsigned threads = 1);

/// Reads a manifest: JSON array of {path, timestamp_label[, node_attributes]}.
/// Relative paths resolve against the manifest's directory.
std::vector<SnapshotSource> read_manifest(const std::filesystem::path& manifest);

/// Parses event-log JSON lines: {time, kind, src, dst?, weight?}.
EventLog read_event_log(const std::filesystem::path& path);
EventLog parse_event_log(std::string_view text);

/// Buckets events into snapshots of width `interval` starting at `origin`.
/// An entity belongs to bucket k when it is alive at any instant of
/// [origin + k*interval, origin + (k+1)*interval); an event instant counts as
/// alive, so a deletion still shows the entity in the bucket it happens in.
/// Events with equal time apply in log order.
DynamicGraph discretize_events(const EventLog& log, double interval, bool directed = false,
                               double origin = 0.0);

struct SnapshotStats {
  std::size_t timestamp_index = 0;
  std::string timestamp_label;
  std::size_t nodes = 0;
  std::size_t edges = 0;
  std::size_t isolated = 0;
};

struct NodeLifetime {
  std::string label;
  std::optional<std::size_t> birth;  // first snapshot containing the node
  std::optional<std::size_t> last_seen;
};

struct ValidationReport {
  std::size_t num_snapshots = 0;
  std::size_t num_nodes = 0;
  std::vector<SnapshotStats> snapshots;
  std::vector<NodeLifetime> lifetimes;  // indexed by NodeId
  std::vector<std::string> warnings;
  std::vector<std::string> breaches;

  bool ok() const noexcept { return breaches.empty(); }
  nlohmann::json to_json() const;
};

ValidationReport validate(const DynamicGraph& g);

nlohmann::json to_json(const DynamicGraph& g);
DynamicGraph graph_from_json(const nlohmann::json& j);

void save_graph(const DynamicGraph& g, const std::filesystem::path& path);
DynamicGraph load_graph(const std::filesystem::path& path);

}  // namespace trajviz
