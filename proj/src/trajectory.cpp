#include "trajviz/trajectory.hpp"

#include "trajviz/parallel.hpp"
#include "trajviz/random.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace trajviz {

using nlohmann::json;

Aggregation parse_aggregation(std::string_view s) {
  if (s == "mean") return Aggregation::mean;
  if (s == "similarity_softmax" || s == "softmax") return Aggregation::similarity_softmax;
  throw UsageError("unknown aggregation '" + std::string(s) + "' (mean, similarity_softmax)");
}

AnchorStrategy parse_anchor_strategy(std::string_view s) {
  if (s == "all_v0") return AnchorStrategy::all_v0;
  if (s == "top_degree") return AnchorStrategy::top_degree;
  if (s == "random") return AnchorStrategy::random;
  throw UsageError("unknown anchor strategy '" + std::string(s) + "' (all_v0, top_degree, random)");
}

std::string to_string(Aggregation a) { return a == Aggregation::mean ? "mean" : "similarity_softmax"; }

std::string to_string(AnchorStrategy s) {
  switch (s) {
    case AnchorStrategy::all_v0: return "all_v0";
    case AnchorStrategy::top_degree: return "top_degree";
    case AnchorStrategy::random: return "random";
  }
  return "?";
}

void AlignmentConfig::validate() const {
  if (k < 1) throw UsageError("alignment: k must be >= 1");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw UsageError("alignment: alpha must lie in [0, 1]");
  if (!(tau > 0.0)) throw UsageError("alignment: tau must be > 0");
  if (anchor_cap < 1) throw UsageError("alignment: anchor cap must be >= 1");
}

json AlignmentConfig::to_json() const {
  json j;
  j["k"] = k;
  j["alpha"] = alpha;
  j["aggregation"] = to_string(aggregation);
  j["tau"] = tau;
  j["anchor_strategy"] = anchor_strategy ? to_string(*anchor_strategy) : "auto";
  j["anchor_cap"] = anchor_cap;
  j["anchor_seed"] = anchor_seed;
  j["reference_t"] = reference_t;
  return j;
}

std::string AlignmentConfig::fingerprint() const { return hex64(fnv1a64(to_json().dump())); }

std::optional<std::size_t> AnchorSet::index_of(NodeId id) const {
  auto it = std::lower_bound(ids.begin(), ids.end(), id);
  if (it == ids.end() || *it != id) return std::nullopt;
  return static_cast<std::size_t>(it - ids.begin());
}

std::string AnchorSet::fingerprint() const {
  std::uint64_t h = fnv1a64(std::to_string(reference_t));
  for (auto id : ids) h = fnv1a64(std::to_string(id) + ",", h);
  for (Eigen::Index i = 0; i < Z.size(); ++i) h = fnv1a64(format_double(Z.data()[i]) + ",", h);
  return hex64(h);
}

std::size_t TrajectorySet::num_points() const {
  std::size_t n = 0;
  for (const auto& p : points) n += p.size();
  return n;
}

std::optional<Point2> TrajectorySet::at(NodeId id, std::size_t t) const {
  if (id >= points.size()) return std::nullopt;
  const auto& pts = points[id];
  auto it = std::lower_bound(pts.begin(), pts.end(), t, [](const TrajectoryPoint& p, std::size_t v) { return p.t < v; });
  if (it == pts.end() || it->t != t) return std::nullopt;
  return Point2{it->x, it->y};
}

AnchorSet make_anchor_set(const EmbeddingSeries& series, std::vector<NodeId> ids, std::size_t reference_t,
                          const Matrix& Z, std::string method) {
  if (reference_t >= series.matrices.size())
    throw ValidationError("anchors: reference_t " + std::to_string(reference_t) + " is out of range");
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) throw ValidationError("anchors: duplicate ids");
  const auto& m = series.matrices[reference_t];
  AnchorSet a;
  a.ids = std::move(ids);
  a.reference_t = reference_t;
  a.X.resize(static_cast<Eigen::Index>(a.ids.size()), static_cast<Eigen::Index>(m.dim()));
  for (std::size_t r = 0; r < a.ids.size(); ++r) {
    auto row = m.row_of(a.ids[r]);
    if (!row)
      throw ValidationError("anchor '" + series.registry.label(a.ids[r]) + "' is missing from the embeddings at t=" +
                            std::to_string(reference_t));
    a.X.row(static_cast<Eigen::Index>(r)) = m.rows().row(static_cast<Eigen::Index>(*row));
  }
  if (Z.rows() != a.X.rows() || Z.cols() != 2) throw ValidationError("anchors: projection must be |V'| x 2");
  a.Z = Z;
  a.projection_method = std::move(method);
  return a;
}

AnchorSet select_anchors(const DynamicGraph& g, const EmbeddingSeries& series, const AlignmentConfig& cfg,
                         const ProjectionConfig& projection) {
  cfg.validate();
  if (g.snapshots.empty() || g.snapshots.front().nodes.empty())
    throw ValidationError("select_anchors: snapshot 0 is empty");
  const auto& v0 = g.snapshots.front().nodes;
  const AnchorStrategy strategy =
      cfg.anchor_strategy.value_or(v0.size() <= kDefaultAnchorCap ? AnchorStrategy::all_v0 : AnchorStrategy::top_degree);
  const std::size_t cap = cfg.anchor_strategy ? cfg.anchor_cap : kDefaultAnchorCap;

  if (v0.size() <= cfg.k)
    throw ValidationError("select_anchors: " + std::to_string(v0.size()) + " candidate anchors but k=" +
                          std::to_string(cfg.k) + " (need more than k)");

  std::vector<NodeId> ids;
  switch (strategy) {
    case AnchorStrategy::all_v0: ids = v0; break;
    case AnchorStrategy::top_degree: {
      std::map<NodeId, std::size_t> degree;
      for (auto id : v0) degree[id] = 0;
      for (const auto& s : g.snapshots)
        for (const auto& e : s.edges) {
          if (auto it = degree.find(e.src); it != degree.end()) ++it->second;
          if (auto it = degree.find(e.dst); it != degree.end()) ++it->second;
        }
      ids = v0;
      std::stable_sort(ids.begin(), ids.end(), [&](NodeId a, NodeId b) { return degree[a] > degree[b]; });
      ids.resize(std::min(cap, ids.size()));
      break;
    }
    case AnchorStrategy::random: {
      ids = v0;
      SplitMix64 rng{cfg.anchor_seed, 0xa9c4ULL};
      const std::size_t take = std::min(cap, ids.size());
      for (std::size_t i = 0; i < take; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.below(ids.size() - i));
        std::swap(ids[i], ids[j]);
      }
      ids.resize(take);
      break;
    }
  }
  std::sort(ids.begin(), ids.end());
  if (ids.size() < cfg.k + 1)
    throw ValidationError("select_anchors: only " + std::to_string(ids.size()) + " anchors selected, need k+1=" +
                          std::to_string(cfg.k + 1));

  // Projection needs X first; build with a placeholder Z then replace.
  AnchorSet a = make_anchor_set(series, ids, cfg.reference_t, Matrix::Zero(static_cast<Eigen::Index>(ids.size()), 2),
                                to_string(projection.method));
  Projection2D proj = project(a.X, projection);
  a.Z = std::move(proj.coords);
  a.projection_fingerprint = proj.fingerprint;
  return a;
}

std::vector<std::size_t> knn_anchors(std::span<const double> similarities, std::size_t k,
                                     std::optional<std::size_t> self) {
  return top_k(similarities, k, self);
}

Point2 aggregate(std::span<const std::size_t> neighbors, std::span<const double> similarities, const Matrix& Z,
                 Aggregation mode, double tau) {
  if (neighbors.empty()) throw ValidationError("aggregate: need at least one neighbour");
  double lo[2] = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  double hi[2] = {-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (auto j : neighbors) {
    for (int c = 0; c < 2; ++c) {
      lo[c] = std::min(lo[c], Z(static_cast<Eigen::Index>(j), c));
      hi[c] = std::max(hi[c], Z(static_cast<Eigen::Index>(j), c));
    }
  }
  Point2 out{0.0, 0.0};
  if (mode == Aggregation::mean) {
    for (auto j : neighbors)
      for (int c = 0; c < 2; ++c) out[c] += Z(static_cast<Eigen::Index>(j), c);
    for (int c = 0; c < 2; ++c) out[c] /= static_cast<double>(neighbors.size());
  } else {
    double smax = -std::numeric_limits<double>::infinity();
    for (auto j : neighbors) smax = std::max(smax, similarities[j]);
    double total = 0.0;
    for (auto j : neighbors) {
      const double w = std::exp((similarities[j] - smax) / tau);
      total += w;
      for (int c = 0; c < 2; ++c) out[c] += w * Z(static_cast<Eigen::Index>(j), c);
    }
    for (int c = 0; c < 2; ++c) out[c] /= total;
  }
  // Convex weights keep the result inside the neighbours' box; clamp away rounding.
  for (int c = 0; c < 2; ++c) out[c] = std::clamp(out[c], lo[c], hi[c]);
  return out;
}

Point2 interpolate(const std::optional<Point2>& z_static, const Point2& z_agg, double alpha, bool is_anchor) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw UsageError("interpolate: alpha must lie in [0, 1]");
  if (!is_anchor) return z_agg;
  if (!z_static) throw ValidationError("interpolate: anchor without a static position");
  return {alpha * (*z_static)[0] + (1.0 - alpha) * z_agg[0], alpha * (*z_static)[1] + (1.0 - alpha) * z_agg[1]};
}

TrajectorySet compute_trajectories(const DynamicGraph& g, const EmbeddingSeries& series, const AnchorSet& anchors,
                                   const AlignmentConfig& cfg) {
  cfg.validate();
  if (series.matrices.size() != g.snapshots.size())
    throw ValidationError("compute_trajectories: embedding series has " + std::to_string(series.matrices.size()) +
                          " snapshots, graph has " + std::to_string(g.snapshots.size()));
  if (anchors.Z.rows() != static_cast<Eigen::Index>(anchors.ids.size()) || anchors.Z.cols() != 2)
    throw ValidationError("compute_trajectories: anchor projection shape mismatch");

  TrajectorySet out;
  out.labels = series.registry.labels();
  out.points.resize(series.registry.size());
  out.meta.method = anchors.projection_method;
  out.meta.k = cfg.k;
  out.meta.alpha = cfg.alpha;
  out.meta.aggregation = to_string(cfg.aggregation);
  out.meta.anchor_count = anchors.ids.size();
  out.meta.reference_t = anchors.reference_t;
  out.meta.anchor_fingerprint = anchors.fingerprint();
  out.meta.config_fingerprint = cfg.fingerprint();
  for (std::size_t r = 0; r < anchors.ids.size(); ++r) {
    out.anchors.push_back({series.registry.label(anchors.ids[r]), anchors.Z(static_cast<Eigen::Index>(r), 0),
                           anchors.Z(static_cast<Eigen::Index>(r), 1)});
  }

  constexpr std::size_t kBlock = 256;
  for (std::size_t t = 0; t < series.matrices.size(); ++t) {
    const auto& m = series.matrices[t];
    out.meta.timestamp_labels.push_back(m.timestamp_label());
    if (m.size() == 0) continue;

    // Anchors present at t, in ascending anchor index (= ascending id).
    std::vector<std::size_t> present;
    std::vector<std::size_t> present_rows;
    for (std::size_t a = 0; a < anchors.ids.size(); ++a) {
      if (auto r = m.row_of(anchors.ids[a])) {
        present.push_back(a);
        present_rows.push_back(*r);
      }
    }
    if (present.size() < anchors.ids.size()) {
      out.meta.warnings.push_back("t=" + std::to_string(t) + ": " +
                                  std::to_string(anchors.ids.size() - present.size()) + " of " +
                                  std::to_string(anchors.ids.size()) + " anchors absent");
    }
    if (present.size() < cfg.k)
      throw ValidationError("compute_trajectories: only " + std::to_string(present.size()) + " anchors present at t=" +
                            std::to_string(t) + ", need k=" + std::to_string(cfg.k));

    const Matrix unit = normalize_rows(m.rows());
    Matrix anchor_unit(static_cast<Eigen::Index>(present.size()), unit.cols());
    for (std::size_t p = 0; p < present.size(); ++p)
      anchor_unit.row(static_cast<Eigen::Index>(p)) = unit.row(static_cast<Eigen::Index>(present_rows[p]));
    const Matrix anchor_unit_t = anchor_unit.transpose();
    Matrix present_Z(static_cast<Eigen::Index>(present.size()), 2);
    for (std::size_t p = 0; p < present.size(); ++p) present_Z.row(static_cast<Eigen::Index>(p)) = anchors.Z.row(static_cast<Eigen::Index>(present[p]));

    std::vector<Point2> placed(m.size());
    const std::size_t blocks = (m.size() + kBlock - 1) / kBlock;
    parallel_for(blocks, cfg.threads, [&](std::size_t b) {
      const std::size_t begin = b * kBlock;
      const std::size_t end = std::min(m.size(), begin + kBlock);
      const Matrix sims = unit.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end - begin)) * anchor_unit_t;
      std::vector<double> row(present.size());
      for (std::size_t r = begin; r < end; ++r) {
        for (std::size_t p = 0; p < present.size(); ++p)
          row[p] = std::clamp(sims(static_cast<Eigen::Index>(r - begin), static_cast<Eigen::Index>(p)), -1.0, 1.0);
        const NodeId id = m.ids()[r];
        const auto anchor_idx = anchors.index_of(id);
        std::optional<std::size_t> self;
        if (anchor_idx) {
          auto it = std::lower_bound(present.begin(), present.end(), *anchor_idx);
          if (it != present.end() && *it == *anchor_idx) self = static_cast<std::size_t>(it - present.begin());
        }
        const std::size_t available = present.size() - (self ? 1 : 0);
        if (available < cfg.k)
          throw ValidationError("compute_trajectories: only " + std::to_string(available) +
                                " other anchors present at t=" + std::to_string(t) + ", need k=" + std::to_string(cfg.k));
        const auto nbrs = knn_anchors(row, cfg.k, self);
        const Point2 agg = aggregate(nbrs, row, present_Z, cfg.aggregation, cfg.tau);
        std::optional<Point2> z_static;
        if (anchor_idx)
          z_static = Point2{anchors.Z(static_cast<Eigen::Index>(*anchor_idx), 0), anchors.Z(static_cast<Eigen::Index>(*anchor_idx), 1)};
        placed[r] = interpolate(z_static, agg, cfg.alpha, anchor_idx.has_value());
      }
    });

    for (std::size_t r = 0; r < m.size(); ++r) {
      if (!std::isfinite(placed[r][0]) || !std::isfinite(placed[r][1]))
        throw NumericError("trajectory", "compute_trajectories", "non-finite position at t=" + std::to_string(t));
      out.points[m.ids()[r]].push_back({t, placed[r][0], placed[r][1]});
    }
  }
  return out;
}

ProcrustesResult procrustes_align(const Matrix& A, const Matrix& B) {
  if (A.rows() != B.rows() || A.cols() != B.cols())
    throw ValidationError("procrustes_align: A and B must have the same shape");
  const Eigen::MatrixXd M = A.transpose() * B;
  if (M.norm() == 0.0) throw NumericError("trajectory", "procrustes_align", "degenerate (zero) cross-covariance");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  ProcrustesResult out;
  out.rotation = svd.matrixU() * svd.matrixV().transpose();
  out.residual = (A * out.rotation - B).norm();
  return out;
}

json to_json(const TrajectorySet& set) {
  json meta;
  meta["method"] = set.meta.method;
  meta["k"] = set.meta.k;
  meta["alpha"] = set.meta.alpha;
  meta["aggregation"] = set.meta.aggregation;
  meta["anchor_count"] = set.meta.anchor_count;
  meta["reference_t"] = set.meta.reference_t;
  meta["anchor_fingerprint"] = set.meta.anchor_fingerprint;
  meta["config_fingerprint"] = set.meta.config_fingerprint;
  meta["timestamps"] = set.meta.timestamp_labels;
  meta["warnings"] = set.meta.warnings;

  json nodes = json::array();
  for (std::size_t id = 0; id < set.labels.size(); ++id) {
    json pts = json::array();
    for (const auto& p : set.points[id]) pts.push_back(json::array({p.t, p.x, p.y}));
    nodes.push_back({{"label", set.labels[id]}, {"points", std::move(pts)}});
  }
  json anchors = json::array();
  for (const auto& a : set.anchors) anchors.push_back({{"label", a.label}, {"x", a.x}, {"y", a.y}});
  return {{"meta", std::move(meta)}, {"nodes", std::move(nodes)}, {"anchors", std::move(anchors)}};
}

TrajectorySet trajectories_from_json(const json& j) {
  TrajectorySet s;
  try {
    const auto& meta = j.at("meta");
    s.meta.method = meta.at("method").get<std::string>();
    s.meta.k = meta.at("k").get<std::size_t>();
    s.meta.alpha = meta.at("alpha").get<double>();
    s.meta.aggregation = meta.at("aggregation").get<std::string>();
    s.meta.anchor_count = meta.at("anchor_count").get<std::size_t>();
    s.meta.reference_t = meta.at("reference_t").get<std::size_t>();
    s.meta.anchor_fingerprint = meta.value("anchor_fingerprint", std::string{});
    s.meta.config_fingerprint = meta.value("config_fingerprint", std::string{});
    s.meta.timestamp_labels = meta.value("timestamps", std::vector<std::string>{});
    s.meta.warnings = meta.value("warnings", std::vector<std::string>{});
    for (const auto& n : j.at("nodes")) {
      s.labels.push_back(n.at("label").get<std::string>());
      std::vector<TrajectoryPoint> pts;
      for (const auto& p : n.at("points"))
        pts.push_back({p.at(0).get<std::size_t>(), p.at(1).get<double>(), p.at(2).get<double>()});
      if (!std::is_sorted(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.t < b.t; }))
        throw ValidationError("trajectory points must be ordered by t");
      s.points.push_back(std::move(pts));
    }
    if (j.contains("anchors")) {
      for (const auto& a : j["anchors"])
        s.anchors.push_back({a.at("label").get<std::string>(), a.at("x").get<double>(), a.at("y").get<double>()});
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed trajectory JSON: ") + e.what());
  }
  return s;
}

}  // namespace trajviz
