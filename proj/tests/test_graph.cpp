#include "trajviz/graph.hpp"

#include "fixtures.hpp"

#include <gmock/gmock.h>

using namespace trajviz;
using fixtures::scratch_dir;
using fixtures::write_file;

namespace {

const Edge* find_edge(const DynamicGraph& g, std::size_t t, std::string_view a, std::string_view b) {
  const auto ia = g.registry.find(a), ib = g.registry.find(b);
  if (!ia || !ib) return nullptr;
  for (const auto& e : g.snapshots.at(t).edges)
    if (e.src == *ia && e.dst == *ib) return &e;
  return nullptr;
}

}  // namespace

TEST(ParseSnapshots, DuplicateRowsAreSummed) {
  const auto dir = scratch_dir();
  auto f0 = write_file(dir / "0.tsv", "a\tb\t1\na\tb\t2\n");
  auto f1 = write_file(dir / "1.tsv", "b\tc\t1\n");
  const auto r = parse_snapshots({f0, f1}, true);
  const auto& g = r.graph;
  ASSERT_EQ(g.num_snapshots(), 2u);
  ASSERT_EQ(g.snapshots[0].edges.size(), 1u);
  const auto* e = find_edge(g, 0, "a", "b");
  ASSERT_NE(e, nullptr);
  EXPECT_EQ(e->weight, 3.0);
  EXPECT_NE(find_edge(g, 1, "b", "c"), nullptr);
}

TEST(ParseSnapshots, EmptyInputIsAnError) {
  try {
    parse_snapshots(std::vector<std::filesystem::path>{}, false);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_THAT(e.what(), ::testing::HasSubstr("no snapshots"));
  }
}

TEST(ParseSnapshots, SelfLoopsAreDroppedAndCounted) {
  const auto dir = scratch_dir();
  auto f = write_file(dir / "0.tsv", "a a 1.0\n");
  const auto r = parse_snapshots({f}, false);
  EXPECT_EQ(r.graph.snapshots[0].edges.size(), 0u);
  EXPECT_EQ(r.self_loops_dropped, 1u);
  EXPECT_EQ(r.warnings.size(), 1u);
}

TEST(ParseSnapshots, MalformedRowReportsLine) {
  const auto dir = scratch_dir();
  auto f = write_file(dir / "0.tsv", "# header\na\tb\t1\nlonely\n");
  try {
    parse_snapshots({f}, false);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_THAT(e.what(), ::testing::HasSubstr(":3"));
  }
}

TEST(ParseSnapshots, NonFiniteWeightIsRejected) {
  const auto dir = scratch_dir();
  auto f = write_file(dir / "0.tsv", "a\tb\tnan\n");
  EXPECT_THROW(parse_snapshots({f}, false), ValidationError);
  auto g = write_file(dir / "1.tsv", "a\tb\tinf\n");
  EXPECT_THROW(parse_snapshots({g}, false), ValidationError);
}

TEST(ParseSnapshots, UndirectedEdgesAreCanonical) {
  const auto dir = scratch_dir();
  auto f = write_file(dir / "0.tsv", "b\ta\t1\na\tb\t0.5\n");
  const auto r = parse_snapshots({f}, false);
  ASSERT_EQ(r.graph.snapshots[0].edges.size(), 1u);
  const auto& e = r.graph.snapshots[0].edges[0];
  EXPECT_LT(e.src, e.dst);
  EXPECT_EQ(e.weight, 1.5);
}

TEST(ParseSnapshots, OrderedByEmbeddedTimestamp) {
  const auto dir = scratch_dir();
  auto f10 = write_file(dir / "snap10.tsv", "x\ty\n");
  auto f9 = write_file(dir / "snap9.tsv", "a\tb\n");
  const auto r = parse_snapshots({f10, f9}, false);
  EXPECT_EQ(r.graph.snapshots[0].timestamp_label, "snap9");
  EXPECT_EQ(r.graph.snapshots[1].timestamp_label, "snap10");
  EXPECT_EQ(r.graph.snapshots[1].timestamp_index, 1u);
}

TEST(ParseSnapshots, ManifestOrdersAndAttachesAttributes) {
  const auto dir = scratch_dir();
  write_file(dir / "late.tsv", "a\tc\n");
  write_file(dir / "early.tsv", "a\tb\n");
  write_file(dir / "attr.tsv", "a\t0.25\nz\t1.5\n");
  write_file(dir / "m.json",
             R"([{"path": "late.tsv", "timestamp_label": "2001"},
                 {"path": "early.tsv", "timestamp_label": "1999", "node_attributes": "attr.tsv"}])");
  const auto r = parse_snapshots(read_manifest(dir / "m.json"), false);
  const auto& g = r.graph;
  ASSERT_EQ(g.num_snapshots(), 2u);
  EXPECT_EQ(g.snapshots[0].timestamp_label, "1999");
  EXPECT_EQ(g.snapshots[0].node_attributes.at(g.registry.at("a")), 0.25);
  EXPECT_TRUE(g.snapshots[0].contains(g.registry.at("z")));  // attribute rows add the node
}

TEST(ParseSnapshots, SerializationRoundTripIsBitExact) {
  const auto dir = scratch_dir();
  auto f0 = write_file(dir / "0.tsv", "a\tb\t0.1\nb\tc\t0.30000000000000004\n");
  auto f1 = write_file(dir / "1.tsv", "c\td\t1e-300\na\td\t123456789.123456789\n");
  const auto g = parse_snapshots({f0, f1}, true).graph;
  save_graph(g, dir / "g.json");
  EXPECT_EQ(load_graph(dir / "g.json"), g);
  EXPECT_EQ(graph_from_json(to_json(g)), g);
}

TEST(ParseSnapshots, RegistryIdsAreStableAcrossSnapshots) {
  const auto dir = scratch_dir();
  std::vector<std::filesystem::path> files;
  for (int t = 0; t < 4; ++t) {
    std::string rows;
    for (int k = 0; k < 6; ++k) rows += "n" + std::to_string((k + t) % 7) + "\tn" + std::to_string((k + 2 * t + 1) % 7) + "\n";
    files.push_back(write_file(dir / (std::to_string(t) + ".tsv"), rows));
  }
  const auto g = parse_snapshots(files, true, 4).graph;
  std::set<std::string> seen;
  for (NodeId id = 0; id < g.registry.size(); ++id) {
    EXPECT_EQ(g.registry.at(g.registry.label(id)), id);
    EXPECT_TRUE(seen.insert(g.registry.label(id)).second);
  }
  EXPECT_EQ(parse_snapshots(files, true, 1).graph, g);  // thread count does not matter
}

// --- events --------------------------------------------------------------------

TEST(DiscretizeEvents, BucketsEdgesByInterval) {
  const auto log = parse_event_log(R"({"time": 0.5, "kind": "add_edge", "src": "a", "dst": "b"}
{"time": 1.5, "kind": "add_edge", "src": "b", "dst": "c"}
)");
  const auto g = discretize_events(log, 1.0);
  ASSERT_EQ(g.num_snapshots(), 2u);
  EXPECT_EQ(g.snapshots[0].edges.size(), 1u);
  EXPECT_NE(find_edge(g, 0, "a", "b"), nullptr);
  EXPECT_EQ(g.snapshots[1].edges.size(), 2u);
  EXPECT_NE(find_edge(g, 1, "a", "b"), nullptr);
  EXPECT_NE(find_edge(g, 1, "b", "c"), nullptr);
}

TEST(DiscretizeEvents, SingleEventGivesOneBucket) {
  const auto log = parse_event_log(R"({"time": 0, "kind": "add_edge", "src": "a", "dst": "b"})");
  EXPECT_EQ(discretize_events(log, 10.0).num_snapshots(), 1u);
}

TEST(DiscretizeEvents, DeleteBeforeAddIsAnError) {
  const auto log = parse_event_log(R"({"time": 0, "kind": "del_edge", "src": "a", "dst": "b"}
{"time": 1, "kind": "add_edge", "src": "a", "dst": "b"})");
  EXPECT_THROW(discretize_events(log, 1.0), ValidationError);
}

TEST(DiscretizeEvents, RejectsBadIntervalAndEmptyLog) {
  const auto log = parse_event_log(R"({"time": 0, "kind": "add_node", "src": "a"})");
  EXPECT_THROW(discretize_events(log, 0.0), ValidationError);
  EXPECT_THROW(discretize_events(log, -1.0), ValidationError);
  EXPECT_THROW(discretize_events(EventLog{}, 1.0), ValidationError);
}

TEST(DiscretizeEvents, DeletionTakesEffectInFollowingBucket) {
  const auto log = parse_event_log(R"({"time": 0.1, "kind": "add_edge", "src": "a", "dst": "b"}
{"time": 1.2, "kind": "del_edge", "src": "a", "dst": "b"}
{"time": 2.5, "kind": "add_node", "src": "c"})");
  const auto g = discretize_events(log, 1.0);
  ASSERT_EQ(g.num_snapshots(), 3u);
  EXPECT_NE(find_edge(g, 1, "a", "b"), nullptr);
  EXPECT_EQ(find_edge(g, 2, "a", "b"), nullptr);
}

TEST(DiscretizeEvents, MatchesIntervalOracleOnRandomLogs) {
  SplitMix64 rng(2024);
  const std::vector<std::string> names = {"a", "b", "c", "d", "e", "f"};
  for (int trial = 0; trial < 300; ++trial) {
    const bool directed = trial % 2 == 0;
    const double interval = std::vector<double>{0.5, 1.0, 2.0}[rng.below(3)];
    const std::size_t count = 1 + rng.below(50);
    std::vector<oracle::EventRec> recs;
    std::set<std::string> alive;
    std::set<std::pair<std::string, std::string>> alive_edges;
    auto key = [&](std::string a, std::string b) {
      if (!directed && b < a) std::swap(a, b);
      return std::make_pair(a, b);
    };
    double time = 0.0;
    for (std::size_t k = 0; k < count; ++k) {
      time += 0.25 * static_cast<double>(rng.below(4));
      const auto& s = names[rng.below(names.size())];
      const auto& d = names[rng.below(names.size())];
      const double w = static_cast<double>(1 + rng.below(5));
      switch (rng.below(4)) {
        case 0: recs.push_back({time, 0, s, "", 1.0}); alive.insert(s); break;
        case 1:
          if (!alive.count(s)) { recs.push_back({time, 0, s, "", 1.0}); alive.insert(s); break; }
          recs.push_back({time, 1, s, "", 1.0});
          alive.erase(s);
          for (auto it = alive_edges.begin(); it != alive_edges.end();)
            it = (it->first == s || it->second == s) ? alive_edges.erase(it) : std::next(it);
          break;
        case 2:
          recs.push_back({time, 2, s, d, w});
          alive.insert(s);
          alive.insert(d);
          if (s != d) alive_edges.insert(key(s, d));
          break;
        case 3:
          if (alive_edges.empty()) { recs.push_back({time, 2, s, d, w}); alive.insert(s); alive.insert(d); if (s != d) alive_edges.insert(key(s, d)); break; }
          {
            auto it = alive_edges.begin();
            std::advance(it, static_cast<long>(rng.below(alive_edges.size())));
            recs.push_back({time, 3, it->first, it->second, 1.0});
            alive_edges.erase(it);
          }
          break;
      }
    }
    EventLog log;
    static const EventKind kinds[] = {EventKind::add_node, EventKind::del_node, EventKind::add_edge, EventKind::del_edge};
    for (const auto& r : recs) log.events.push_back({r.time, kinds[r.kind], r.src, r.dst, r.weight});

    const auto g = discretize_events(log, interval, directed);
    const auto expect = oracle::bucket_events(recs, interval, directed);
    ASSERT_EQ(g.num_snapshots(), expect.size()) << "trial " << trial;
    for (std::size_t b = 0; b < expect.size(); ++b) {
      std::set<std::string> nodes;
      for (auto id : g.snapshots[b].nodes) nodes.insert(g.registry.label(id));
      EXPECT_EQ(nodes, expect[b].nodes) << "trial " << trial << " bucket " << b;
      std::map<std::pair<std::string, std::string>, double> edges;
      for (const auto& e : g.snapshots[b].edges) {
        auto a = g.registry.label(e.src), c = g.registry.label(e.dst);
        if (!directed && c < a) std::swap(a, c);  // the oracle keys undirected edges lexically
        edges[{a, c}] = e.weight;
      }
      EXPECT_EQ(edges, expect[b].edges) << "trial " << trial << " bucket " << b;
    }
  }
}

// --- validate ------------------------------------------------------------------

TEST(Validate, ReportsCountsAndBirths) {
  const auto dir = scratch_dir();
  auto f0 = write_file(dir / "0.tsv", "a\tb\t1\na\tb\t2\n");
  auto f1 = write_file(dir / "1.tsv", "b\tc\t1\n");
  const auto g = parse_snapshots({f0, f1}, true).graph;
  const auto r = validate(g);
  EXPECT_TRUE(r.ok());
  const auto j = r.to_json();
  EXPECT_EQ(j["T"], 2);
  EXPECT_EQ(j["nodes"], 3);
  EXPECT_EQ(j["births"]["a"], 0);
  EXPECT_EQ(j["births"]["b"], 0);
  EXPECT_EQ(j["births"]["c"], 1);
}

TEST(Validate, EmptySnapshotWarns) {
  DynamicGraph g;
  g.snapshots.push_back(Snapshot{0, "0", {}, {}, {}});
  const auto r = validate(g);
  ASSERT_EQ(r.snapshots.size(), 1u);
  EXPECT_EQ(r.snapshots[0].edges, 0u);
  ASSERT_FALSE(r.warnings.empty());
  EXPECT_THAT(r.warnings[0], ::testing::HasSubstr("empty snapshot"));
}

TEST(Validate, UnregisteredIdIsABreach) {
  DynamicGraph g;
  g.registry.intern("a");
  g.snapshots.push_back(Snapshot{0, "0", {Edge{0, 5, 1.0}}, {0}, {}});
  const auto r = validate(g);
  EXPECT_FALSE(r.ok());
}
