#include "trajviz/graph.hpp"

#include "trajviz/parallel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace trajviz {

namespace fs = std::filesystem;
using nlohmann::json;

NodeId NodeRegistry::intern(std::string_view label) {
  std::string key(label);
  if (auto it = index_.find(key); it != index_.end()) return it->second;
  const auto id = static_cast<NodeId>(labels_.size());
  labels_.push_back(key);
  index_.emplace(std::move(key), id);
  return id;
}

std::optional<NodeId> NodeRegistry::find(std::string_view label) const {
  if (auto it = index_.find(std::string(label)); it != index_.end()) return it->second;
  return std::nullopt;
}

NodeId NodeRegistry::at(std::string_view label) const {
  if (auto id = find(label)) return *id;
  throw ValidationError("unknown node label '" + std::string(label) + "'");
}

bool Snapshot::contains(NodeId id) const {
  return std::binary_search(nodes.begin(), nodes.end(), id);
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::optional<double> parse_number(std::string_view s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

// Splits on tabs when the line has any, otherwise on runs of spaces.
std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  if (line.find('\t') != std::string_view::npos) {
    std::size_t start = 0;
    while (true) {
      const auto pos = line.find('\t', start);
      out.push_back(trim(line.substr(start, pos - start)));
      if (pos == std::string_view::npos) break;
      start = pos + 1;
    }
  } else {
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && line[i] == ' ') ++i;
      const auto b = i;
      while (i < line.size() && line[i] != ' ') ++i;
      if (i > b) out.push_back(line.substr(b, i - b));
    }
  }
  return out;
}

struct RawRow {
  std::string src;
  std::string dst;
  double weight = 1.0;
};

struct RawSnapshot {
  std::vector<RawRow> rows;
  std::vector<std::pair<std::string, double>> attributes;
};

template <typename RowFn>
void for_each_data_line(const std::string& text, const fs::path& path, RowFn&& fn) {
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    ++line_no;
    const auto line = trim(std::string_view(text).substr(start, end - start));
    start = end + 1;
    if (line.empty() || line.front() == '#') continue;
    fn(split_fields(line), path.string() + ":" + std::to_string(line_no));
  }
}

RawSnapshot parse_raw(const SnapshotSource& src) {
  RawSnapshot raw;
  for_each_data_line(read_file(src.path), src.path, [&](const auto& f, const std::string& where) {
    if (f.size() < 2 || f.size() > 3 || f[0].empty() || f[1].empty())
      throw ValidationError("malformed row at " + where + ": expected src<TAB>dst<TAB>weight");
    double w = 1.0;
    if (f.size() == 3) {
      auto parsed = parse_number(f[2]);
      if (!parsed) throw ValidationError("malformed weight at " + where);
      if (!std::isfinite(*parsed)) throw ValidationError("non-finite weight at " + where);
      w = *parsed;
    }
    raw.rows.push_back({std::string(f[0]), std::string(f[1]), w});
  });
  if (src.node_attributes) {
    const auto& p = *src.node_attributes;
    for_each_data_line(read_file(p), p, [&](const auto& f, const std::string& where) {
      if (f.size() != 2) throw ValidationError("malformed attribute row at " + where);
      auto v = parse_number(f[1]);
      if (!v) throw ValidationError("malformed attribute value at " + where);
      if (!std::isfinite(*v)) throw ValidationError("non-finite attribute at " + where);
      raw.attributes.emplace_back(std::string(f[0]), *v);
    });
  }
  return raw;
}

std::pair<NodeId, NodeId> canonical(NodeId a, NodeId b, bool directed) {
  if (!directed && b < a) std::swap(a, b);
  return {a, b};
}

std::vector<Edge> edges_from(const std::map<std::pair<NodeId, NodeId>, double>& agg) {
  std::vector<Edge> edges;
  edges.reserve(agg.size());
  for (const auto& [key, w] : agg) edges.push_back({key.first, key.second, w});
  return edges;
}

}  // namespace

bool timestamp_label_less(std::string_view a, std::string_view b) {
  const auto na = parse_number(a);
  const auto nb = parse_number(b);
  if (na && nb && *na != *nb) return *na < *nb;
  // natural order
  std::size_t i = 0, j = 0;
  auto is_digit = [](char c) { return c >= '0' && c <= '9'; };
  while (i < a.size() && j < b.size()) {
    if (is_digit(a[i]) && is_digit(b[j])) {
      std::size_t ie = i, je = j;
      while (ie < a.size() && is_digit(a[ie])) ++ie;
      while (je < b.size() && is_digit(b[je])) ++je;
      auto da = a.substr(i, ie - i);
      auto db = b.substr(j, je - j);
      while (da.size() > 1 && da.front() == '0') da.remove_prefix(1);
      while (db.size() > 1 && db.front() == '0') db.remove_prefix(1);
      if (da.size() != db.size()) return da.size() < db.size();
      if (da != db) return da < db;
      i = ie;
      j = je;
    } else {
      if (a[i] != b[j]) return a[i] < b[j];
      ++i;
      ++j;
    }
  }
  if ((a.size() - i) != (b.size() - j)) return (a.size() - i) < (b.size() - j);
  return a < b;
}

ParseResult parse_snapshots(const std::vector<fs::path>& paths, bool directed, unsigned threads) {
  std::vector<SnapshotSource> sources;
  sources.reserve(paths.size());
  for (const auto& p : paths) sources.push_back({p, p.stem().string(), std::nullopt});
  return parse_snapshots(std::move(sources), directed, threads);
}

ParseResult parse_snapshots(std::vector<SnapshotSource> sources, bool directed, unsigned threads) {
  if (sources.empty()) throw ValidationError("no snapshots");
  std::stable_sort(sources.begin(), sources.end(), [](const auto& a, const auto& b) {
    return timestamp_label_less(a.timestamp_label, b.timestamp_label);
  });
  for (std::size_t i = 1; i < sources.size(); ++i) {
    if (sources[i].timestamp_label == sources[i - 1].timestamp_label)
      throw ValidationError("duplicate timestamp label '" + sources[i].timestamp_label + "'");
  }

  std::vector<RawSnapshot> raw(sources.size());
  parallel_for(sources.size(), threads, [&](std::size_t i) { raw[i] = parse_raw(sources[i]); });

  ParseResult result;
  result.graph.directed = directed;
  auto& reg = result.graph.registry;
  for (std::size_t t = 0; t < sources.size(); ++t) {
    Snapshot snap;
    snap.timestamp_index = t;
    snap.timestamp_label = sources[t].timestamp_label;
    std::set<NodeId> mask;
    std::map<std::pair<NodeId, NodeId>, double> agg;
    std::size_t loops = 0;
    for (const auto& row : raw[t].rows) {
      const NodeId s = reg.intern(row.src);
      const NodeId d = reg.intern(row.dst);
      mask.insert(s);
      mask.insert(d);
      if (s == d) {
        ++loops;
        continue;
      }
      agg[canonical(s, d, directed)] += row.weight;
    }
    for (const auto& [label, value] : raw[t].attributes) {
      const NodeId id = reg.intern(label);
      mask.insert(id);
      snap.node_attributes[id] = value;
    }
    for (const auto& [key, w] : agg) {
      if (!std::isfinite(w))
        throw ValidationError("non-finite aggregated weight in snapshot '" + snap.timestamp_label + "'");
    }
    if (loops > 0) {
      result.warnings.push_back("snapshot '" + snap.timestamp_label + "': dropped " +
                                std::to_string(loops) + " self-loop(s)");
      result.self_loops_dropped += loops;
    }
    snap.edges = edges_from(agg);
    snap.nodes.assign(mask.begin(), mask.end());
    result.graph.snapshots.push_back(std::move(snap));
  }
  return result;
}

std::vector<SnapshotSource> read_manifest(const fs::path& manifest) {
  json j;
  try {
    j = json::parse(read_file(manifest));
  } catch (const json::exception& e) {
    throw ValidationError("manifest '" + manifest.string() + "': " + e.what());
  }
  if (!j.is_array()) throw ValidationError("manifest must be a JSON array");
  const auto base = manifest.parent_path();
  std::vector<SnapshotSource> out;
  for (const auto& entry : j) {
    if (!entry.is_object() || !entry.contains("path") || !entry["path"].is_string())
      throw ValidationError("manifest entry needs a string 'path'");
    SnapshotSource s;
    fs::path p = entry["path"].get<std::string>();
    s.path = p.is_absolute() ? p : base / p;
    s.timestamp_label = entry.contains("timestamp_label")
                            ? entry["timestamp_label"].get<std::string>()
                            : p.stem().string();
    if (entry.contains("node_attributes")) {
      fs::path a = entry["node_attributes"].get<std::string>();
      s.node_attributes = a.is_absolute() ? a : base / a;
    }
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

EventKind parse_kind(std::string_view s) {
  if (s == "add_node") return EventKind::add_node;
  if (s == "del_node") return EventKind::del_node;
  if (s == "add_edge") return EventKind::add_edge;
  if (s == "del_edge") return EventKind::del_edge;
  throw ValidationError("unknown event kind '" + std::string(s) + "'");
}

bool is_edge_event(EventKind k) { return k == EventKind::add_edge || k == EventKind::del_edge; }

}  // namespace

EventLog parse_event_log(std::string_view text) {
  EventLog log;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    const auto line = trim(text.substr(start, end - start));
    start = end + 1;
    if (line.empty() || line.front() == '#') continue;
    try {
      const auto j = json::parse(line);
      Event e;
      e.time = j.at("time").get<double>();
      e.kind = parse_kind(j.at("kind").get<std::string>());
      e.src = j.at("src").get<std::string>();
      if (is_edge_event(e.kind)) e.dst = j.at("dst").get<std::string>();
      if (j.contains("weight")) e.weight = j["weight"].get<double>();
      log.events.push_back(std::move(e));
    } catch (const json::exception& ex) {
      throw ValidationError("malformed event at line " + std::to_string(line_no) + ": " + ex.what());
    }
  }
  return log;
}

EventLog read_event_log(const fs::path& path) { return parse_event_log(read_file(path)); }

DynamicGraph discretize_events(const EventLog& log, double interval, bool directed, double origin) {
  if (log.events.empty()) throw ValidationError("empty event log");
  if (!(interval > 0.0) || !std::isfinite(interval))
    throw ValidationError("interval must be a positive finite number");

  std::vector<std::size_t> order(log.events.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (const auto& e : log.events) {
    if (!std::isfinite(e.time)) throw ValidationError("non-finite event time");
    if (e.time < origin) throw ValidationError("event time precedes the origin");
    if (!std::isfinite(e.weight)) throw ValidationError("non-finite event weight");
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return log.events[a].time < log.events[b].time; });

  auto bucket_of = [&](double t) {
    return static_cast<std::size_t>(std::floor((t - origin) / interval));
  };

  DynamicGraph g;
  g.directed = directed;
  // Register labels in time order so ids do not depend on log layout.
  for (auto idx : order) {
    const auto& e = log.events[idx];
    g.registry.intern(e.src);
    if (is_edge_event(e.kind)) g.registry.intern(e.dst);
  }

  const std::size_t buckets = bucket_of(log.events[order.back()].time) + 1;
  std::set<NodeId> alive_nodes;
  std::map<std::pair<NodeId, NodeId>, double> alive_edges;
  std::size_t cursor = 0;

  for (std::size_t k = 0; k < buckets; ++k) {
    std::set<NodeId> nodes = alive_nodes;
    std::map<std::pair<NodeId, NodeId>, double> edges = alive_edges;
    while (cursor < order.size() && bucket_of(log.events[order[cursor]].time) == k) {
      const auto& e = log.events[order[cursor++]];
      const NodeId s = g.registry.at(e.src);
      switch (e.kind) {
        case EventKind::add_node:
          alive_nodes.insert(s);
          nodes.insert(s);
          break;
        case EventKind::del_node: {
          if (!alive_nodes.erase(s))
            throw ValidationError("del_node for '" + e.src + "' which is not alive");
          for (auto it = alive_edges.begin(); it != alive_edges.end();) {
            if (it->first.first == s || it->first.second == s) it = alive_edges.erase(it);
            else ++it;
          }
          break;
        }
        case EventKind::add_edge: {
          const NodeId d = g.registry.at(e.dst);
          alive_nodes.insert(s);
          alive_nodes.insert(d);
          nodes.insert(s);
          nodes.insert(d);
          if (s == d) break;  // self-loops are not stored
          const auto key = canonical(s, d, directed);
          alive_edges[key] = e.weight;
          edges[key] = e.weight;
          break;
        }
        case EventKind::del_edge: {
          const NodeId d = g.registry.at(e.dst);
          if (!alive_edges.erase(canonical(s, d, directed)))
            throw ValidationError("del_edge (" + e.src + ", " + e.dst + ") which is not alive");
          break;
        }
      }
    }
    Snapshot snap;
    snap.timestamp_index = k;
    snap.timestamp_label = format_double(origin + static_cast<double>(k) * interval);
    snap.nodes.assign(nodes.begin(), nodes.end());
    snap.edges = edges_from(edges);
    g.snapshots.push_back(std::move(snap));
  }
  return g;
}

ValidationReport validate(const DynamicGraph& g) {
  ValidationReport r;
  r.num_snapshots = g.snapshots.size();
  r.num_nodes = g.registry.size();
  r.lifetimes.resize(g.registry.size());
  for (NodeId id = 0; id < g.registry.size(); ++id) r.lifetimes[id].label = g.registry.label(id);
  if (g.snapshots.empty()) r.breaches.push_back("graph has no snapshots");

  const std::size_t n = g.registry.size();
  for (std::size_t t = 0; t < g.snapshots.size(); ++t) {
    const auto& s = g.snapshots[t];
    const auto where = "snapshot " + std::to_string(t) + " ('" + s.timestamp_label + "')";
    if (s.timestamp_index != t) r.breaches.push_back(where + ": timestamp_index out of order");
    if (!std::is_sorted(s.nodes.begin(), s.nodes.end()) ||
        std::adjacent_find(s.nodes.begin(), s.nodes.end()) != s.nodes.end())
      r.breaches.push_back(where + ": node mask not sorted/unique");

    std::set<NodeId> touched;
    for (const auto id : s.nodes) {
      if (id >= n) {
        r.breaches.push_back(where + ": node id " + std::to_string(id) + " is not registered");
        continue;
      }
      auto& life = r.lifetimes[id];
      if (!life.birth) life.birth = t;
      life.last_seen = t;
    }
    for (std::size_t e = 0; e < s.edges.size(); ++e) {
      const auto& edge = s.edges[e];
      if (edge.src >= n || edge.dst >= n) {
        r.breaches.push_back(where + ": edge references unregistered id");
        continue;
      }
      if (!s.contains(edge.src) || !s.contains(edge.dst))
        r.breaches.push_back(where + ": edge endpoint missing from node mask");
      if (edge.src == edge.dst) r.breaches.push_back(where + ": self-loop stored");
      if (!std::isfinite(edge.weight)) r.breaches.push_back(where + ": non-finite weight");
      if (!g.directed && edge.src > edge.dst)
        r.breaches.push_back(where + ": undirected edge not in canonical order");
      if (e > 0) {
        const auto& prev = s.edges[e - 1];
        if (std::pair(prev.src, prev.dst) >= std::pair(edge.src, edge.dst))
          r.breaches.push_back(where + ": edges not sorted/unique");
      }
      touched.insert(edge.src);
      touched.insert(edge.dst);
    }
    for (const auto& [id, v] : s.node_attributes) {
      if (!s.contains(id)) r.breaches.push_back(where + ": attribute for absent node");
      if (!std::isfinite(v)) r.breaches.push_back(where + ": non-finite node attribute");
    }
    SnapshotStats st;
    st.timestamp_index = t;
    st.timestamp_label = s.timestamp_label;
    st.nodes = s.nodes.size();
    st.edges = s.edges.size();
    for (const auto id : s.nodes)
      if (!touched.count(id)) ++st.isolated;
    if (st.edges == 0) r.warnings.push_back(where + ": empty snapshot");
    r.snapshots.push_back(st);
  }
  return r;
}

json ValidationReport::to_json() const {
  json j;
  j["T"] = num_snapshots;
  j["nodes"] = num_nodes;
  j["ok"] = ok();
  json snaps = json::array();
  for (const auto& s : snapshots) {
    snaps.push_back({{"timestamp_index", s.timestamp_index},
                     {"timestamp_label", s.timestamp_label},
                     {"nodes", s.nodes},
                     {"edges", s.edges},
                     {"isolated", s.isolated}});
  }
  j["snapshots"] = std::move(snaps);
  json births = json::object();
  json last = json::object();
  for (const auto& l : lifetimes) {
    if (l.birth) births[l.label] = *l.birth;
    if (l.last_seen) last[l.label] = *l.last_seen;
  }
  j["births"] = std::move(births);
  j["last_seen"] = std::move(last);
  j["warnings"] = warnings;
  j["breaches"] = breaches;
  return j;
}

json to_json(const DynamicGraph& g) {
  json j;
  j["format"] = "trajviz.dynamic_graph";
  j["version"] = 1;
  j["directed"] = g.directed;
  j["labels"] = g.registry.labels();
  json snaps = json::array();
  for (const auto& s : g.snapshots) {
    json edges = json::array();
    for (const auto& e : s.edges) edges.push_back(json::array({e.src, e.dst, e.weight}));
    json attrs = json::array();
    for (const auto& [id, v] : s.node_attributes) attrs.push_back(json::array({id, v}));
    snaps.push_back({{"timestamp_index", s.timestamp_index},
                     {"timestamp_label", s.timestamp_label},
                     {"nodes", s.nodes},
                     {"edges", std::move(edges)},
                     {"node_attributes", std::move(attrs)}});
  }
  j["snapshots"] = std::move(snaps);
  return j;
}

DynamicGraph graph_from_json(const json& j) {
  DynamicGraph g;
  try {
    if (j.value("format", std::string{}) != "trajviz.dynamic_graph")
      throw ValidationError("not a dynamic graph document");
    g.directed = j.at("directed").get<bool>();
    for (const auto& label : j.at("labels")) {
      const auto before = g.registry.size();
      g.registry.intern(label.get<std::string>());
      if (g.registry.size() == before) throw ValidationError("duplicate label in registry");
    }
    for (const auto& sj : j.at("snapshots")) {
      Snapshot s;
      s.timestamp_index = sj.at("timestamp_index").get<std::size_t>();
      s.timestamp_label = sj.at("timestamp_label").get<std::string>();
      s.nodes = sj.at("nodes").get<std::vector<NodeId>>();
      for (const auto& e : sj.at("edges"))
        s.edges.push_back({e.at(0).get<NodeId>(), e.at(1).get<NodeId>(), e.at(2).get<double>()});
      if (sj.contains("node_attributes")) {
        for (const auto& a : sj["node_attributes"]) s.node_attributes[a.at(0).get<NodeId>()] = a.at(1).get<double>();
      }
      g.snapshots.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed dynamic graph JSON: ") + e.what());
  }
  const auto report = validate(g);
  if (!report.ok()) throw ValidationError("invalid dynamic graph: " + report.breaches.front());
  return g;
}

void save_graph(const DynamicGraph& g, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  out << to_json(g).dump(1) << '\n';
}

DynamicGraph load_graph(const fs::path& path) {
  try {
    return graph_from_json(json::parse(read_file(path)));
  } catch (const json::parse_error& e) {
    throw ValidationError("'" + path.string() + "': " + e.what());
  }
}

}  // namespace trajviz
