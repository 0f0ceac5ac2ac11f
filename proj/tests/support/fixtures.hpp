#pragma once

#include "trajviz/embedding.hpp"
#include "trajviz/graph.hpp"
#include "trajviz/random.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>

namespace fixtures {

namespace fs = std::filesystem;

/// Fresh directory under the system temp dir, named after the running test.
inline fs::path scratch_dir() {
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  std::string name = "trajviz_";
  if (info) name += std::string(info->test_suite_name()) + "_" + info->name();
  for (auto& c : name)
    if (!std::isalnum(static_cast<unsigned char>(c))) c = '_';
  auto dir = fs::temp_directory_path() / (name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

inline fs::path write_file(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
  return p;
}

inline std::string read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

inline std::string label(std::size_t i) { return "n" + std::to_string(i); }

/// A graph whose snapshot t contains exactly nodes[t] (labels "n<i>"), no edges.
inline trajviz::DynamicGraph graph_with_nodes(const std::vector<std::vector<std::size_t>>& nodes, std::size_t total) {
  trajviz::DynamicGraph g;
  for (std::size_t i = 0; i < total; ++i) g.registry.intern(label(i));
  for (std::size_t t = 0; t < nodes.size(); ++t) {
    trajviz::Snapshot s;
    s.timestamp_index = t;
    s.timestamp_label = std::to_string(t);
    for (auto i : nodes[t]) s.nodes.push_back(static_cast<trajviz::NodeId>(i));
    std::sort(s.nodes.begin(), s.nodes.end());
    g.snapshots.push_back(std::move(s));
  }
  return g;
}

/// Builds an EmbeddingSeries from per-timestamp maps id -> vector. Rows are
/// emitted in ascending id order.
inline trajviz::EmbeddingSeries series_from(const oracle::Series& s, std::size_t total) {
  trajviz::EmbeddingSeries out;
  for (std::size_t i = 0; i < total; ++i) out.registry.intern(label(i));
  for (std::size_t t = 0; t < s.size(); ++t) {
    std::vector<trajviz::NodeId> ids;
    const std::size_t d = s[t].empty() ? 2 : s[t].begin()->second.size();
    trajviz::Matrix m(static_cast<Eigen::Index>(s[t].size()), static_cast<Eigen::Index>(d));
    Eigen::Index r = 0;
    for (const auto& [id, v] : s[t]) {
      ids.push_back(id);
      for (std::size_t k = 0; k < d; ++k) m(r, static_cast<Eigen::Index>(k)) = v[k];
      ++r;
    }
    out.matrices.emplace_back(t, std::to_string(t), std::move(ids), std::move(m));
  }
  return out;
}

/// Random series: each node is present at each t with probability `presence`
/// (node 0..min_common-1 always present), Gaussian coordinates.
inline oracle::Series random_series(trajviz::SplitMix64& rng, std::size_t n, std::size_t T, std::size_t d,
                                    double presence, std::size_t always) {
  oracle::Series s(T);
  for (std::size_t t = 0; t < T; ++t)
    for (unsigned i = 0; i < n; ++i) {
      if (i >= always && rng.uniform() > presence) continue;
      oracle::Vec v(d);
      for (auto& x : v) x = rng.normal();
      s[t][i] = v;
    }
  return s;
}

}  // namespace fixtures
