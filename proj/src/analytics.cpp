#include "trajviz/analytics.hpp"

#include "trajviz/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

namespace trajviz {

using nlohmann::json;

NeighborSpace parse_neighbor_space(std::string_view s) {
  if (s == "raw_embedding" || s == "raw") return NeighborSpace::raw_embedding;
  if (s == "projected_2d" || s == "projected") return NeighborSpace::projected_2d;
  throw UsageError("unknown neighbour space '" + std::string(s) + "' (raw_embedding, projected_2d)");
}

MovementVariant parse_movement_variant(std::string_view s) {
  if (s == "raw") return MovementVariant::raw;
  if (s == "unit_normalized") return MovementVariant::unit_normalized;
  if (s == "projected") return MovementVariant::projected;
  throw UsageError("unknown movement variant '" + std::string(s) + "' (raw, unit_normalized, projected)");
}

std::string to_string(NeighborSpace s) { return s == NeighborSpace::raw_embedding ? "raw_embedding" : "projected_2d"; }

std::string to_string(MovementVariant v) {
  switch (v) {
    case MovementVariant::raw: return "raw";
    case MovementVariant::unit_normalized: return "unit_normalized";
    case MovementVariant::projected: return "projected";
  }
  return "?";
}

void MetricConfig::validate() const {
  if (n < 1 || m < 1) throw UsageError("metrics: n and m must be >= 1");
  if (!(p > 0.0 && p < 1.0)) throw UsageError("metrics: p must lie in (0, 1)");
}

json MetricConfig::to_json() const {
  return {{"n", n}, {"m", m}, {"p", p}, {"space", to_string(space)}, {"movement", to_string(movement)}};
}

std::string MetricConfig::fingerprint() const { return hex64(fnv1a64(to_json().dump())); }

// ---------------------------------------------------------------------------
// PointSeries

PointSeries PointSeries::from_embeddings(const EmbeddingSeries& series, bool unit_normalize) {
  PointSeries ps;
  ps.metric_ = Metric::cosine;
  ps.labels_ = series.registry.labels();
  for (const auto& m : series.matrices) {
    std::vector<std::size_t> order(m.size());
    for (std::size_t r = 0; r < order.size(); ++r) order[r] = r;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return m.ids()[a] < m.ids()[b]; });
    std::vector<NodeId> ids;
    Matrix pts(static_cast<Eigen::Index>(m.size()), static_cast<Eigen::Index>(m.dim()));
    for (std::size_t k = 0; k < order.size(); ++k) {
      ids.push_back(m.ids()[order[k]]);
      pts.row(static_cast<Eigen::Index>(k)) = m.rows().row(static_cast<Eigen::Index>(order[k]));
    }
    ps.ids_.push_back(std::move(ids));
    ps.points_.push_back(unit_normalize ? normalize_rows(pts) : std::move(pts));
  }
  return ps;
}

PointSeries PointSeries::from_trajectories(const TrajectorySet& trajectories) {
  PointSeries ps;
  ps.metric_ = Metric::euclidean;
  ps.labels_ = trajectories.labels;
  std::size_t T = trajectories.meta.timestamp_labels.size();
  for (const auto& pts : trajectories.points)
    for (const auto& p : pts) T = std::max(T, p.t + 1);
  ps.ids_.resize(T);
  std::vector<std::vector<Point2>> coords(T);
  for (NodeId id = 0; id < trajectories.points.size(); ++id) {
    for (const auto& p : trajectories.points[id]) {
      ps.ids_[p.t].push_back(id);
      coords[p.t].push_back({p.x, p.y});
    }
  }
  for (std::size_t t = 0; t < T; ++t) {
    Matrix m(static_cast<Eigen::Index>(coords[t].size()), 2);
    for (std::size_t r = 0; r < coords[t].size(); ++r) {
      m(static_cast<Eigen::Index>(r), 0) = coords[t][r][0];
      m(static_cast<Eigen::Index>(r), 1) = coords[t][r][1];
    }
    ps.points_.push_back(std::move(m));
  }
  return ps;
}

namespace {

std::optional<std::size_t> find_row(const std::vector<NodeId>& ids, NodeId id) {
  auto it = std::lower_bound(ids.begin(), ids.end(), id);
  if (it == ids.end() || *it != id) return std::nullopt;
  return static_cast<std::size_t>(it - ids.begin());
}

}  // namespace

bool PointSeries::contains(NodeId id, std::size_t t) const {
  return t < ids_.size() && find_row(ids_[t], id).has_value();
}

Eigen::Ref<const Eigen::RowVectorXd> PointSeries::point(NodeId id, std::size_t t) const {
  if (t >= ids_.size()) throw ValidationError("timestamp " + std::to_string(t) + " out of range");
  auto r = find_row(ids_[t], id);
  if (!r) throw ValidationError("node '" + labels_.at(id) + "' is absent at t=" + std::to_string(t));
  return points_[t].row(static_cast<Eigen::Index>(*r));
}

double PointSeries::proximity(std::size_t t, NodeId a, NodeId b) const {
  const auto pa = point(a, t);
  const auto pb = point(b, t);
  if (metric_ == Metric::euclidean) return -(pa - pb).squaredNorm();
  const double na = pa.norm(), nb = pb.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(pa.dot(pb) / (na * nb), -1.0, 1.0);
}

std::vector<NodeId> PointSeries::common(std::size_t t) const {
  if (t == 0 || t >= ids_.size()) throw ValidationError("transition index must lie in [1, T)");
  std::vector<NodeId> out;
  std::set_intersection(ids_[t - 1].begin(), ids_[t - 1].end(), ids_[t].begin(), ids_[t].end(),
                        std::back_inserter(out));
  return out;
}

// ---------------------------------------------------------------------------
// Rankings and list metrics

namespace {

std::vector<NodeId> full_ranking(const PointSeries& points, NodeId i, std::size_t t, std::span<const NodeId> candidates) {
  if (!points.contains(i, t))
    throw ValidationError("node '" + points.labels().at(i) + "' is absent at t=" + std::to_string(t));
  std::vector<std::pair<double, NodeId>> scored;
  scored.reserve(candidates.size());
  for (auto j : candidates)
    if (j != i) scored.emplace_back(points.proximity(t, i, j), j);
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<NodeId> out;
  out.reserve(scored.size());
  for (const auto& [s, j] : scored) out.push_back(j);
  return out;
}

void require_depth(std::size_t depth, std::size_t available, const char* what) {
  if (depth > available)
    throw ValidationError(std::string(what) + " depth " + std::to_string(depth) + " exceeds the " +
                          std::to_string(available) + " available neighbours");
}

void require_transition(const PointSeries& points, NodeId i, std::size_t t) {
  if (t == 0 || t >= points.num_snapshots()) throw ValidationError("transition index must lie in [1, T)");
  if (!points.contains(i, t - 1) || !points.contains(i, t))
    throw ValidationError("node '" + points.labels().at(i) + "' is not present at both t=" + std::to_string(t - 1) +
                          " and t=" + std::to_string(t));
}

}  // namespace

RankedNeighborList ranked_neighbors(const PointSeries& points, NodeId i, std::size_t t, std::size_t depth,
                                    std::span<const NodeId> candidates) {
  if (t >= points.num_snapshots()) throw ValidationError("timestamp " + std::to_string(t) + " out of range");
  const auto& all = points.ids(t);
  if (candidates.empty()) candidates = std::span<const NodeId>(all);
  RankedNeighborList out;
  out.owner = i;
  out.timestamp_index = t;
  out.neighbors = full_ranking(points, i, t, candidates);
  require_depth(depth, out.neighbors.size(), "ranked_neighbors");
  out.neighbors.resize(depth);
  return out;
}

double jaccard_index(std::span<const NodeId> a, std::span<const NodeId> b) {
  std::unordered_set<NodeId> sa(a.begin(), a.end());
  std::unordered_set<NodeId> sb(b.begin(), b.end());
  if (sa.empty() && sb.empty()) return 1.0;
  std::size_t inter = 0;
  for (auto x : sa) inter += sb.count(x);
  const std::size_t uni = sa.size() + sb.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

RboValue rank_biased_overlap(std::span<const NodeId> a, std::span<const NodeId> b, std::size_t m, double p) {
  if (!(p > 0.0 && p < 1.0)) throw UsageError("rbo: p must lie in (0, 1)");
  if (m < 1) throw UsageError("rbo: m must be >= 1");
  require_depth(m, std::min(a.size(), b.size()), "rbo");
  std::unordered_set<NodeId> seen_a, seen_b;
  std::size_t overlap = 0;
  double weight = 1.0;    // p^{d-1}
  double weighted = 0.0;  // sum p^{d-1} * overlap_d / d
  double total = 0.0;     // sum p^{d-1}
  for (std::size_t d = 1; d <= m; ++d) {
    const NodeId x = a[d - 1], y = b[d - 1];
    if (x == y) {
      ++overlap;
    } else {
      if (seen_b.count(x)) ++overlap;
      if (seen_a.count(y)) ++overlap;
    }
    seen_a.insert(x);
    seen_b.insert(y);
    weighted += weight * static_cast<double>(overlap) / static_cast<double>(d);
    total += weight;
    weight *= p;
  }
  // total == (1 - p^m) / (1 - p), so weighted / total is raw / (1 - p^m).
  return {(1.0 - p) * weighted, weighted / total};
}

double average_rank_change(std::span<const NodeId> before, std::span<const NodeId> after, std::size_t common_size) {
  if (before.size() != after.size()) throw ValidationError("arc: rankings differ in length");
  if (common_size == 0) throw ValidationError("arc: empty common node set");
  std::unordered_map<NodeId, std::size_t> rank;
  rank.reserve(before.size());
  for (std::size_t k = 0; k < before.size(); ++k) rank[before[k]] = k + 1;
  double sum = 0.0;
  for (std::size_t k = 0; k < after.size(); ++k) {
    auto it = rank.find(after[k]);
    if (it == rank.end()) throw ValidationError("arc: rankings cover different nodes");
    const auto r_after = k + 1;
    sum += static_cast<double>(r_after > it->second ? r_after - it->second : it->second - r_after);
  }
  return sum / static_cast<double>(common_size);
}

double jaccard_n(const PointSeries& points, NodeId i, std::size_t t, std::size_t n) {
  require_transition(points, i, t);
  const auto c = points.common(t);
  auto before = full_ranking(points, i, t - 1, c);
  auto after = full_ranking(points, i, t, c);
  require_depth(n, before.size(), "jaccard");
  before.resize(n);
  after.resize(n);
  return jaccard_index(before, after);
}

RboValue rbo(const PointSeries& points, NodeId i, std::size_t m, std::size_t t, double p) {
  require_transition(points, i, t);
  const auto c = points.common(t);
  return rank_biased_overlap(full_ranking(points, i, t - 1, c), full_ranking(points, i, t, c), m, p);
}

double arc(const PointSeries& points, NodeId i, std::size_t t) {
  require_transition(points, i, t);
  const auto c = points.common(t);
  return average_rank_change(full_ranking(points, i, t - 1, c), full_ranking(points, i, t, c), c.size());
}

double narc(const PointSeries& points) {
  const std::size_t T = points.num_snapshots();
  if (T < 2) throw ValidationError("narc: need at least 2 snapshots");
  double total = 0.0;
  for (std::size_t t = 1; t < T; ++t) {
    const auto c = points.common(t);
    if (c.size() < 2)
      throw ValidationError("narc: transition " + std::to_string(t) + " has fewer than 2 common nodes");
    double sum = 0.0;
    for (auto i : c) sum += average_rank_change(full_ranking(points, i, t - 1, c), full_ranking(points, i, t, c), c.size());
    total += sum / static_cast<double>(c.size() - 1);
  }
  return total / static_cast<double>(T - 1);
}

RboValue macro_rbo(const PointSeries& points, std::size_t m, double p) {
  const std::size_t T = points.num_snapshots();
  if (T < 2) throw ValidationError("macro_rbo: need at least 2 snapshots");
  RboValue out;
  for (std::size_t t = 1; t < T; ++t) {
    const auto c = points.common(t);
    if (c.empty()) throw ValidationError("macro_rbo: transition " + std::to_string(t) + " has no common nodes");
    RboValue sum;
    for (auto i : c) {
      const auto v = rank_biased_overlap(full_ranking(points, i, t - 1, c), full_ranking(points, i, t, c), m, p);
      sum.raw += v.raw;
      sum.normalized += v.normalized;
    }
    out.raw += sum.raw / static_cast<double>(c.size());
    out.normalized += sum.normalized / static_cast<double>(c.size());
  }
  out.raw /= static_cast<double>(T - 1);
  out.normalized /= static_cast<double>(T - 1);
  return out;
}

MovementResult movement_lp(const PointSeries& points) {
  const std::size_t T = points.num_snapshots();
  if (T < 2) throw ValidationError("movement_lp: need at least 2 snapshots");
  MovementResult out;
  std::size_t used = 0;
  for (std::size_t t = 1; t < T; ++t) {
    const auto c = points.common(t);
    if (c.empty()) continue;
    double s1 = 0.0, s2 = 0.0;
    for (auto i : c) {
      const Eigen::RowVectorXd diff = points.point(i, t) - points.point(i, t - 1);
      const double l1 = diff.lpNorm<1>();
      const double l2 = diff.norm();
      out.per_node.push_back({i, t, l1, l2});
      s1 += l1;
      s2 += l2;
    }
    out.l1 += s1 / static_cast<double>(c.size());
    out.l2 += s2 / static_cast<double>(c.size());
    ++used;
  }
  if (used > 0) {
    out.l1 /= static_cast<double>(used);
    out.l2 /= static_cast<double>(used);
  }
  return out;
}

namespace {

PointSeries movement_points(const EmbeddingSeries& series, const TrajectorySet* trajectories, MovementVariant variant) {
  switch (variant) {
    case MovementVariant::raw: return PointSeries::from_embeddings(series, false);
    case MovementVariant::unit_normalized: return PointSeries::from_embeddings(series, true);
    case MovementVariant::projected:
      if (!trajectories) throw UsageError("movement variant 'projected' requires trajectories");
      return PointSeries::from_trajectories(*trajectories);
  }
  throw UsageError("unknown movement variant");
}

}  // namespace

MovementResult movement_lp(const EmbeddingSeries& series, const TrajectorySet* trajectories, MovementVariant variant) {
  return movement_lp(movement_points(series, trajectories, variant));
}

json MetricReport::summary_json() const {
  json j;
  j["narc"] = narc;
  j["macro_rbo_raw"] = macro_rbo_raw;
  j["macro_rbo_normalized"] = macro_rbo_normalized;
  j["L1"] = l1;
  j["L2"] = l2;
  j["transitions"] = transitions;
  j["rows"] = rows.size();
  j["config"] = config.to_json();
  j["config_fingerprint"] = config.fingerprint();
  return j;
}

MetricReport compute_report(const EmbeddingSeries& series, const TrajectorySet* trajectories, const MetricConfig& cfg) {
  cfg.validate();
  if (series.num_snapshots() < 2) throw ValidationError("analytics: need at least 2 snapshots");
  if (cfg.space == NeighborSpace::projected_2d && !trajectories)
    throw UsageError("neighbour space 'projected_2d' requires trajectories");
  const PointSeries nbr = cfg.space == NeighborSpace::raw_embedding ? PointSeries::from_embeddings(series)
                                                                     : PointSeries::from_trajectories(*trajectories);
  const PointSeries mov = movement_points(series, trajectories, cfg.movement);
  if (nbr.num_snapshots() != series.num_snapshots() || mov.num_snapshots() != series.num_snapshots())
    throw ValidationError("analytics: trajectories and embeddings cover different timestamps");

  MetricReport report;
  report.labels = series.registry.labels();
  report.config = cfg;
  const std::size_t T = series.num_snapshots();
  report.transitions = T - 1;

  double narc_total = 0.0;
  RboValue macro;
  for (std::size_t t = 1; t < T; ++t) {
    const auto c = nbr.common(t);
    if (c.size() < 2)
      throw ValidationError("analytics: transition " + std::to_string(t) + " has " + std::to_string(c.size()) +
                            " common nodes; need at least 2");
    require_depth(cfg.n, c.size() - 1, "jaccard");
    require_depth(cfg.m, c.size() - 1, "rbo");

    std::vector<NodeTransitionMetrics> rows(c.size());
    parallel_for(c.size(), cfg.threads, [&](std::size_t k) {
      const NodeId i = c[k];
      const auto before = full_ranking(nbr, i, t - 1, c);
      const auto after = full_ranking(nbr, i, t, c);
      auto& row = rows[k];
      row.node = i;
      row.t = t;
      row.jaccard = jaccard_index(std::span(before).first(cfg.n), std::span(after).first(cfg.n));
      const auto r = rank_biased_overlap(before, after, cfg.m, cfg.p);
      row.rbo_raw = r.raw;
      row.rbo_normalized = r.normalized;
      row.arc = average_rank_change(before, after, c.size());
      if (mov.contains(i, t - 1) && mov.contains(i, t)) {
        const Eigen::RowVectorXd diff = mov.point(i, t) - mov.point(i, t - 1);
        row.l1 = diff.lpNorm<1>();
        row.l2 = diff.norm();
      }
    });

    double arc_sum = 0.0;
    RboValue rbo_sum;
    for (const auto& row : rows) {
      arc_sum += row.arc;
      rbo_sum.raw += row.rbo_raw;
      rbo_sum.normalized += row.rbo_normalized;
    }
    narc_total += arc_sum / static_cast<double>(c.size() - 1);
    macro.raw += rbo_sum.raw / static_cast<double>(c.size());
    macro.normalized += rbo_sum.normalized / static_cast<double>(c.size());
    report.rows.insert(report.rows.end(), rows.begin(), rows.end());
  }
  report.narc = narc_total / static_cast<double>(T - 1);
  report.macro_rbo_raw = macro.raw / static_cast<double>(T - 1);
  report.macro_rbo_normalized = macro.normalized / static_cast<double>(T - 1);
  const auto movement = movement_lp(mov);
  report.l1 = movement.l1;
  report.l2 = movement.l2;
  return report;
}

}  // namespace trajviz
