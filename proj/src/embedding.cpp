#include "trajviz/embedding.hpp"

#include "trajviz/parallel.hpp"
#include "trajviz/random.hpp"
#include "trajviz/similarity.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace trajviz {

namespace fs = std::filesystem;

EmbeddingMatrix::EmbeddingMatrix(std::size_t timestamp_index, std::string timestamp_label,
                                 std::vector<NodeId> ids, Matrix rows)
    : timestamp_index_(timestamp_index),
      timestamp_label_(std::move(timestamp_label)),
      ids_(std::move(ids)),
      rows_(std::move(rows)) {
  if (static_cast<std::size_t>(rows_.rows()) != ids_.size())
    throw ValidationError("embedding matrix: row count does not match id count");
  if (!rows_.allFinite()) throw ValidationError("embedding matrix: non-finite entry");
  row_index_.reserve(ids_.size());
  for (std::size_t r = 0; r < ids_.size(); ++r) {
    if (!row_index_.emplace(ids_[r], r).second)
      throw ValidationError("embedding matrix: duplicate node id " + std::to_string(ids_[r]));
  }
}

std::optional<std::size_t> EmbeddingMatrix::row_of(NodeId id) const {
  if (auto it = row_index_.find(id); it != row_index_.end()) return it->second;
  return std::nullopt;
}

Eigen::Ref<const Eigen::RowVectorXd> EmbeddingMatrix::row(NodeId id) const {
  auto r = row_of(id);
  if (!r) throw ValidationError("node id " + std::to_string(id) + " absent at timestamp " +
                                std::to_string(timestamp_index_));
  return rows_.row(static_cast<Eigen::Index>(*r));
}

void TrainingConfig::validate() const {
  if (dim < 2) throw UsageError("training: dim must be >= 2");
  if (lambda_link < 0 || lambda_node < 0 || lambda_edge < 0)
    throw UsageError("training: loss weights must be >= 0");
  if (!(learning_rate > 0) || !(min_learning_rate >= 0) || min_learning_rate > learning_rate)
    throw UsageError("training: need 0 <= min_learning_rate <= learning_rate, learning_rate > 0");
  if (walk_length < 1 || window < 1) throw UsageError("training: walk_length and window must be >= 1");
}

// ---------------------------------------------------------------------------
// Loss and gradient

namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// ln(1 + e^x)
double softplus(double x) {
  if (x > 0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

struct DenseGrad {
  ModelParams g;

  explicit DenseGrad(const ModelParams& p) {
    g.embeddings = Matrix::Zero(p.embeddings.rows(), p.embeddings.cols());
    g.readout = Vector::Zero(p.readout.size());
    g.bias = 0.0;
  }
  auto row(std::size_t i) { return g.embeddings.row(static_cast<Eigen::Index>(i)); }
  Vector& readout() { return g.readout; }
  double& bias() { return g.bias; }
};

// Gradient touching only a handful of rows; used by the SGD loop.
struct SparseGrad {
  std::vector<std::size_t> idx;
  std::vector<Eigen::RowVectorXd> rows;
  Vector readout_grad;
  double bias_grad = 0.0;
  Eigen::Index dim;

  explicit SparseGrad(Eigen::Index d, Eigen::Index readout_dim)
      : readout_grad(Vector::Zero(readout_dim)), dim(d) {}

  void clear() {
    idx.clear();
    rows.clear();
    readout_grad.setZero();
    bias_grad = 0.0;
  }
  Eigen::RowVectorXd& row(std::size_t i) {
    for (std::size_t k = 0; k < idx.size(); ++k)
      if (idx[k] == i) return rows[k];
    idx.push_back(i);
    rows.push_back(Eigen::RowVectorXd::Zero(dim));
    return rows.back();
  }
  Vector& readout() { return readout_grad; }
  double& bias() { return bias_grad; }
};

template <typename Acc>
double link_term(const ModelParams& p, const LinkSample& s, double scale, Acc& acc) {
  const auto& E = p.embeddings;
  const auto c = E.row(static_cast<Eigen::Index>(s.center));
  const auto x = E.row(static_cast<Eigen::Index>(s.context));
  const double pos = c.dot(x);
  double loss = softplus(-pos);
  const double gpos = (sigmoid(pos) - 1.0) * scale;
  Eigen::RowVectorXd gc = gpos * x;
  acc.row(s.context) += gpos * c;
  for (auto n : s.negatives) {
    const auto nv = E.row(static_cast<Eigen::Index>(n));
    const double neg = c.dot(nv);
    loss += softplus(neg);
    const double gneg = sigmoid(neg) * scale;
    gc += gneg * nv;
    acc.row(n) += gneg * c;
  }
  acc.row(s.center) += gc;
  return loss;
}

template <typename Acc>
double node_term(const ModelParams& p, const NodeSample& s, double scale, Acc& acc) {
  const auto v = p.embeddings.row(static_cast<Eigen::Index>(s.node));
  const double r = v.dot(p.readout) + p.bias - s.target;
  const double g = 2.0 * r * scale;
  acc.row(s.node) += g * p.readout.transpose();
  acc.readout() += g * v.transpose();
  acc.bias() += g;
  return r * r;
}

template <typename Acc>
double edge_term(const ModelParams& p, const EdgeSample& s, double scale, Acc& acc) {
  const auto a = p.embeddings.row(static_cast<Eigen::Index>(s.src));
  const auto b = p.embeddings.row(static_cast<Eigen::Index>(s.dst));
  const double r = a.dot(b) - s.target;
  const double g = 2.0 * r * scale;
  Eigen::RowVectorXd ga = g * b;
  acc.row(s.dst) += g * a;
  acc.row(s.src) += ga;
  return r * r;
}

void require_finite(double v, const char* term) {
  if (!std::isfinite(v))
    throw NumericError("embedding", "loss_and_grad", std::string("non-finite ") + term + " term");
}

template <typename Acc>
LossBreakdown accumulate(const ModelParams& p, const Minibatch& b, const TrainingConfig& cfg, Acc& acc) {
  LossBreakdown out;
  if (!b.links.empty()) {
    const double scale = cfg.lambda_link / static_cast<double>(b.links.size());
    for (const auto& s : b.links) out.link += link_term(p, s, scale, acc);
    out.link /= static_cast<double>(b.links.size());
    require_finite(out.link, "link");
  }
  if (!b.nodes.empty()) {
    const double scale = cfg.lambda_node / static_cast<double>(b.nodes.size());
    for (const auto& s : b.nodes) out.node += node_term(p, s, scale, acc);
    out.node /= static_cast<double>(b.nodes.size());
    require_finite(out.node, "node");
  }
  if (!b.edges.empty()) {
    const double scale = cfg.lambda_edge / static_cast<double>(b.edges.size());
    for (const auto& s : b.edges) out.edge += edge_term(p, s, scale, acc);
    out.edge /= static_cast<double>(b.edges.size());
    require_finite(out.edge, "edge");
  }
  out.total = cfg.lambda_link * out.link + cfg.lambda_node * out.node + cfg.lambda_edge * out.edge;
  return out;
}

}  // namespace

LossAndGrad loss_and_grad(const ModelParams& params, const Minibatch& batch, const TrainingConfig& cfg) {
  if (params.readout.size() != params.embeddings.cols())
    throw ValidationError("loss_and_grad: readout size must equal embedding dimension");
  if (!params.embeddings.allFinite() || !params.readout.allFinite() || !std::isfinite(params.bias))
    throw NumericError("embedding", "loss_and_grad", "non-finite parameters");
  const auto n = static_cast<std::size_t>(params.embeddings.rows());
  auto check = [n](std::size_t i) {
    if (i >= n) throw ValidationError("loss_and_grad: sample index out of range");
  };
  for (const auto& s : batch.links) {
    check(s.center);
    check(s.context);
    for (auto k : s.negatives) check(k);
  }
  for (const auto& s : batch.nodes) check(s.node);
  for (const auto& s : batch.edges) {
    check(s.src);
    check(s.dst);
  }

  DenseGrad acc(params);
  LossAndGrad out;
  out.loss = accumulate(params, batch, cfg, acc);
  out.grad = std::move(acc.g);
  if (!out.grad.embeddings.allFinite() || !out.grad.readout.allFinite() || !std::isfinite(out.grad.bias))
    throw NumericError("embedding", "loss_and_grad", "non-finite gradient");
  return out;
}

// ---------------------------------------------------------------------------
// Training

NodeTargets node_targets_from(const DynamicGraph& g) {
  NodeTargets out;
  out.reserve(g.snapshots.size());
  for (const auto& s : g.snapshots) out.push_back(s.node_attributes);
  return out;
}

Vector initial_embedding(std::uint64_t seed, std::size_t t, NodeId id, std::size_t dim) {
  SplitMix64 rng{seed, 0x1a17ULL, t, id};
  const double std_dev = 1.0 / std::sqrt(static_cast<double>(dim));
  Vector v(static_cast<Eigen::Index>(dim));
  for (Eigen::Index k = 0; k < v.size(); ++k) v[k] = std_dev * rng.normal();
  return v;
}

namespace {

// Weighted adjacency over snapshot rows, with cumulative |weight| per row for
// walk sampling.
struct Adjacency {
  std::vector<std::vector<std::size_t>> nbrs;
  std::vector<std::vector<double>> cum;
};

Adjacency build_adjacency(const Snapshot& s, const EmbeddingMatrix& layout, bool directed) {
  Adjacency a;
  const auto n = layout.size();
  std::vector<std::vector<std::pair<std::size_t, double>>> tmp(n);
  for (const auto& e : s.edges) {
    const auto u = *layout.row_of(e.src);
    const auto v = *layout.row_of(e.dst);
    tmp[u].emplace_back(v, std::abs(e.weight));
    if (!directed) tmp[v].emplace_back(u, std::abs(e.weight));
  }
  a.nbrs.resize(n);
  a.cum.resize(n);
  for (std::size_t u = 0; u < n; ++u) {
    double run = 0.0;
    for (auto [v, w] : tmp[u]) {
      a.nbrs[u].push_back(v);
      run += w;
      a.cum[u].push_back(run);
    }
  }
  return a;
}

std::size_t step_walk(const Adjacency& a, std::size_t u, SplitMix64& rng) {
  const auto& nb = a.nbrs[u];
  const auto& cum = a.cum[u];
  if (cum.back() <= 0.0) return nb[rng.below(nb.size())];
  const double r = rng.uniform() * cum.back();
  auto it = std::upper_bound(cum.begin(), cum.end(), r);
  if (it == cum.end()) --it;
  return nb[static_cast<std::size_t>(it - cum.begin())];
}

struct Pair {
  std::size_t center;
  std::size_t context;
};

std::vector<Pair> walk_pairs(const Adjacency& adj, const TrainingConfig& cfg, std::size_t t, std::size_t epoch) {
  const std::size_t n = adj.nbrs.size();
  std::vector<std::vector<Pair>> per_node(n);
  parallel_for(n, cfg.threads, [&](std::size_t start) {
    auto& out = per_node[start];
    std::vector<std::size_t> walk;
    for (std::size_t w = 0; w < cfg.walks_per_node; ++w) {
      SplitMix64 rng{cfg.seed, 0x3a1cULL, t, epoch, start, w};
      walk.clear();
      walk.push_back(start);
      while (walk.size() < cfg.walk_length && !adj.nbrs[walk.back()].empty())
        walk.push_back(step_walk(adj, walk.back(), rng));
      for (std::size_t i = 0; i < walk.size(); ++i) {
        const std::size_t lo = i >= cfg.window ? i - cfg.window : 0;
        const std::size_t hi = std::min(walk.size() - 1, i + cfg.window);
        for (std::size_t j = lo; j <= hi; ++j)
          if (j != i && walk[j] != walk[i]) out.push_back({walk[i], walk[j]});
      }
    }
  });
  std::vector<Pair> pairs;
  for (auto& v : per_node) pairs.insert(pairs.end(), v.begin(), v.end());
  return pairs;
}

// Unigram^0.75 over (degree + 1), so isolated nodes can still be drawn.
std::vector<double> noise_table(const Adjacency& adj) {
  std::vector<double> cum(adj.nbrs.size());
  double run = 0.0;
  for (std::size_t u = 0; u < adj.nbrs.size(); ++u) {
    run += std::pow(static_cast<double>(adj.nbrs[u].size() + 1), 0.75);
    cum[u] = run;
  }
  return cum;
}

std::size_t draw_noise(const std::vector<double>& cum, SplitMix64& rng) {
  const double r = rng.uniform() * cum.back();
  auto it = std::upper_bound(cum.begin(), cum.end(), r);
  if (it == cum.end()) --it;
  return static_cast<std::size_t>(it - cum.begin());
}

enum class SampleKind : std::uint8_t { link, node, edge };

struct SampleRef {
  SampleKind kind;
  std::uint32_t index;
};

void apply(ModelParams& p, SparseGrad& g, double lr) {
  for (std::size_t k = 0; k < g.idx.size(); ++k)
    p.embeddings.row(static_cast<Eigen::Index>(g.idx[k])) -= lr * g.rows[k];
  p.readout -= lr * g.readout_grad;
  p.bias -= lr * g.bias_grad;
}

}  // namespace

EmbeddingSeries train_series(const DynamicGraph& g, const TrainingConfig& cfg, const NodeTargets* node_targets,
                             bool edge_targets) {
  cfg.validate();
  if (g.snapshots.empty()) throw ValidationError("train_series: graph has no snapshots");
  if (cfg.lambda_node > 0) {
    bool any = false;
    if (node_targets) {
      if (node_targets->size() != g.snapshots.size())
        throw UsageError("train_series: node targets must have one entry per snapshot");
      for (const auto& m : *node_targets) any = any || !m.empty();
    }
    if (!any) throw UsageError("train_series: lambda_node > 0 requires node targets");
  }
  if (cfg.lambda_edge > 0 && !edge_targets)
    throw UsageError("train_series: lambda_edge > 0 requires edge weights as targets");

  const auto d = static_cast<Eigen::Index>(cfg.dim);
  EmbeddingSeries series;
  series.registry = g.registry;

  Vector readout = Vector::Zero(d);
  double bias = 0.0;
  const EmbeddingMatrix* prev = nullptr;

  for (std::size_t t = 0; t < g.snapshots.size(); ++t) {
    const auto& snap = g.snapshots[t];
    const std::size_t n = snap.nodes.size();

    ModelParams params;
    params.embeddings.resize(static_cast<Eigen::Index>(n), d);
    for (std::size_t r = 0; r < n; ++r) {
      const NodeId id = snap.nodes[r];
      if (prev && prev->contains(id)) params.embeddings.row(static_cast<Eigen::Index>(r)) = prev->row(id);
      else params.embeddings.row(static_cast<Eigen::Index>(r)) = initial_embedding(cfg.seed, t, id, cfg.dim).transpose();
    }
    params.readout = readout;
    params.bias = bias;

    // Layout only: maps ids to rows for adjacency construction.
    const EmbeddingMatrix layout(t, snap.timestamp_label, snap.nodes, Matrix::Zero(static_cast<Eigen::Index>(n), 1));
    const Adjacency adj = build_adjacency(snap, layout, g.directed);
    const auto noise = n > 0 ? noise_table(adj) : std::vector<double>{};

    std::vector<NodeSample> node_samples;
    if (cfg.lambda_node > 0) {
      for (const auto& [id, y] : (*node_targets)[t])
        if (auto r = layout.row_of(id)) node_samples.push_back({*r, y});
    }
    std::vector<EdgeSample> edge_samples;
    if (cfg.lambda_edge > 0) {
      for (const auto& e : snap.edges) edge_samples.push_back({*layout.row_of(e.src), *layout.row_of(e.dst), e.weight});
    }

    SparseGrad grad(d, d);
    for (std::size_t epoch = 0; epoch < cfg.epochs && n > 0; ++epoch) {
      std::vector<LinkSample> links;
      if (cfg.lambda_link > 0) {
        const auto pairs = walk_pairs(adj, cfg, t, epoch);
        SplitMix64 neg_rng{cfg.seed, 0x9e9ULL, t, epoch};
        links.reserve(pairs.size());
        for (const auto& pr : pairs) {
          LinkSample s{pr.center, pr.context, {}};
          for (std::size_t k = 0; k < cfg.negatives; ++k) {
            for (int attempt = 0; attempt < 10; ++attempt) {
              const auto cand = draw_noise(noise, neg_rng);
              if (cand != pr.center && cand != pr.context) {
                s.negatives.push_back(cand);
                break;
              }
            }
          }
          links.push_back(std::move(s));
        }
      }

      std::vector<SampleRef> order;
      order.reserve(links.size() + node_samples.size() + edge_samples.size());
      for (std::size_t i = 0; i < links.size(); ++i) order.push_back({SampleKind::link, static_cast<std::uint32_t>(i)});
      for (std::size_t i = 0; i < node_samples.size(); ++i) order.push_back({SampleKind::node, static_cast<std::uint32_t>(i)});
      for (std::size_t i = 0; i < edge_samples.size(); ++i) order.push_back({SampleKind::edge, static_cast<std::uint32_t>(i)});
      SplitMix64 shuffle_rng{cfg.seed, 0x5bu, t, epoch};
      shuffle_rng.shuffle(std::span<SampleRef>(order));

      const double span_lr = cfg.learning_rate - cfg.min_learning_rate;
      for (std::size_t step = 0; step < order.size(); ++step) {
        const double progress =
            (static_cast<double>(epoch) + static_cast<double>(step) / static_cast<double>(order.size())) /
            static_cast<double>(cfg.epochs);
        const double lr = cfg.learning_rate - span_lr * progress;
        grad.clear();
        const auto ref = order[step];
        switch (ref.kind) {
          case SampleKind::link: link_term(params, links[ref.index], cfg.lambda_link, grad); break;
          case SampleKind::node: node_term(params, node_samples[ref.index], cfg.lambda_node, grad); break;
          case SampleKind::edge: edge_term(params, edge_samples[ref.index], cfg.lambda_edge, grad); break;
        }
        apply(params, grad, lr);
      }
      if (!params.embeddings.allFinite() || !params.readout.allFinite() || !std::isfinite(params.bias))
        throw NumericError("embedding", "train_series",
                           "non-finite parameters at snapshot " + std::to_string(t) + ", epoch " + std::to_string(epoch));
    }

    readout = params.readout;
    bias = params.bias;
    series.matrices.emplace_back(t, snap.timestamp_label, snap.nodes, std::move(params.embeddings));
    prev = &series.matrices.back();
  }
  return series;
}

// ---------------------------------------------------------------------------
// I/O

namespace {

constexpr char kBinaryMagic[8] = {'T', 'V', 'E', 'M', 'B', '0', '0', '1'};

void check_token(const std::string& s, const char* what) {
  if (s.empty() || s.find_first_of(" \t\r\n") != std::string::npos)
    throw ValidationError(std::string("cannot save embeddings: ") + what + " '" + s +
                          "' is empty or contains whitespace");
}

void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

std::uint64_t get_u64(std::istream& in, const fs::path& p) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw ValidationError("'" + p.string() + "': truncated binary embedding file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void put_string(std::ostream& out, const std::string& s) {
  put_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in, const fs::path& p) {
  const auto len = get_u64(in, p);
  if (len > (1u << 20)) throw ValidationError("'" + p.string() + "': implausible string length");
  std::string s(len, '\0');
  if (!in.read(s.data(), static_cast<std::streamsize>(len))) throw ValidationError("'" + p.string() + "': truncated binary embedding file");
  return s;
}

struct RawEmbedding {
  std::string timestamp_label;
  std::vector<std::string> labels;
  Matrix rows;
};

RawEmbedding read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  RawEmbedding raw;
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("'" + path.string() + "': missing header");
  std::istringstream header(line);
  std::size_t n = 0, d = 0;
  if (!(header >> n >> d >> raw.timestamp_label))
    throw ValidationError("'" + path.string() + "': header must be 'N d timestamp_label'");
  raw.rows.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  raw.labels.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    if (!std::getline(in, line))
      throw ValidationError("'" + path.string() + "': expected " + std::to_string(n) + " rows");
    const auto where = path.string() + ":" + std::to_string(r + 2);
    std::string_view sv(line);
    if (!sv.empty() && sv.back() == '\r') sv.remove_suffix(1);
    std::size_t pos = sv.find(' ');
    if (pos == std::string_view::npos) throw ValidationError("malformed embedding row at " + where);
    raw.labels.emplace_back(sv.substr(0, pos));
    for (std::size_t k = 0; k < d; ++k) {
      while (pos < sv.size() && sv[pos] == ' ') ++pos;
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(sv.data() + pos, sv.data() + sv.size(), v);
      if (ec != std::errc{}) throw ValidationError("malformed embedding row at " + where);
      pos = static_cast<std::size_t>(ptr - sv.data());
      raw.rows(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = v;
    }
    while (pos < sv.size() && sv[pos] == ' ') ++pos;
    if (pos != sv.size()) throw ValidationError("embedding row at " + where + " has more than d values");
  }
  return raw;
}

RawEmbedding read_binary(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  char magic[8];
  if (!in.read(magic, 8) || !std::equal(magic, magic + 8, kBinaryMagic))
    throw ValidationError("'" + path.string() + "': not a binary embedding file");
  RawEmbedding raw;
  const auto n = get_u64(in, path);
  const auto d = get_u64(in, path);
  raw.timestamp_label = get_string(in, path);
  raw.rows.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::uint64_t r = 0; r < n; ++r) {
    raw.labels.push_back(get_string(in, path));
    for (std::uint64_t k = 0; k < d; ++k)
      raw.rows(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = std::bit_cast<double>(get_u64(in, path));
  }
  return raw;
}

}  // namespace

std::vector<fs::path> save_embeddings(const EmbeddingSeries& series, const fs::path& dir, EmbeddingFormat format) {
  fs::create_directories(dir);
  std::vector<fs::path> written;
  for (std::size_t t = 0; t < series.matrices.size(); ++t) {
    const auto& m = series.matrices[t];
    char name[32];
    std::snprintf(name, sizeof name, "%04zu.%s", t, format == EmbeddingFormat::text ? "emb" : "bin");
    const auto path = dir / name;
    if (format == EmbeddingFormat::text) {
      check_token(m.timestamp_label(), "timestamp label");
      std::ofstream out(path, std::ios::binary);
      if (!out) throw ValidationError("cannot write '" + path.string() + "'");
      out << m.size() << ' ' << m.dim() << ' ' << m.timestamp_label() << '\n';
      for (std::size_t r = 0; r < m.size(); ++r) {
        const auto& label = series.registry.label(m.ids()[r]);
        check_token(label, "node label");
        out << label;
        for (std::size_t k = 0; k < m.dim(); ++k)
          out << ' ' << format_double(m.rows()(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)));
        out << '\n';
      }
    } else {
      std::ofstream out(path, std::ios::binary);
      if (!out) throw ValidationError("cannot write '" + path.string() + "'");
      out.write(kBinaryMagic, 8);
      put_u64(out, m.size());
      put_u64(out, m.dim());
      put_string(out, m.timestamp_label());
      for (std::size_t r = 0; r < m.size(); ++r) {
        put_string(out, series.registry.label(m.ids()[r]));
        for (std::size_t k = 0; k < m.dim(); ++k)
          put_u64(out, std::bit_cast<std::uint64_t>(m.rows()(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k))));
      }
    }
    written.push_back(path);
  }
  return written;
}

std::vector<fs::path> list_embedding_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ValidationError("embeddings directory '" + dir.string() + "' does not exist");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto ext = entry.path().extension();
    if (entry.is_regular_file() && (ext == ".emb" || ext == ".bin")) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ValidationError("no embedding files in '" + dir.string() + "'");
  return files;
}

EmbeddingSeries load_embeddings(const std::vector<fs::path>& paths, const DynamicGraph* graph) {
  if (paths.empty()) throw ValidationError("no embedding files given");
  if (graph && graph->snapshots.size() != paths.size())
    throw ValidationError("embedding file count " + std::to_string(paths.size()) +
                          " does not match snapshot count " + std::to_string(graph->snapshots.size()));
  EmbeddingSeries series;
  if (graph) series.registry = graph->registry;
  for (std::size_t t = 0; t < paths.size(); ++t) {
    const auto& path = paths[t];
    RawEmbedding raw = path.extension() == ".bin" ? read_binary(path) : read_text(path);
    if (raw.rows.cols() < 2) throw ValidationError("'" + path.string() + "': dimension must be >= 2");
    if (t > 0 && static_cast<std::size_t>(raw.rows.cols()) != series.dim())
      throw ValidationError("dimension mismatch: '" + path.string() + "' has d=" + std::to_string(raw.rows.cols()) +
                            ", expected d=" + std::to_string(series.dim()));
    std::vector<NodeId> ids;
    ids.reserve(raw.labels.size());
    for (const auto& label : raw.labels) {
      if (graph) {
        auto id = series.registry.find(label);
        if (!id) throw ValidationError("'" + path.string() + "': label '" + label + "' is not in the graph");
        ids.push_back(*id);
      } else {
        ids.push_back(series.registry.intern(label));
      }
    }
    if (graph) {
      std::vector<NodeId> sorted = ids;
      std::sort(sorted.begin(), sorted.end());
      if (sorted != graph->snapshots[t].nodes)
        throw ValidationError("'" + path.string() + "': rows do not match the node set of snapshot " + std::to_string(t));
    }
    try {
      series.matrices.emplace_back(t, raw.timestamp_label, std::move(ids), std::move(raw.rows));
    } catch (const ValidationError& e) {
      throw ValidationError("'" + path.string() + "': " + e.what());
    }
  }
  return series;
}

Snapshot build_knn_graph(const EmbeddingMatrix& m, std::size_t k) {
  const std::size_t n = m.size();
  if (k < 1 || k >= n)
    throw UsageError("build_knn_graph: k=" + std::to_string(k) + " must satisfy 1 <= k < N=" + std::to_string(n));
  const Matrix unit = normalize_rows(m.rows());
  // Rank by id, not by row position, so ties resolve to the lower id.
  std::vector<std::size_t> by_id(n);
  for (std::size_t r = 0; r < n; ++r) by_id[r] = r;
  std::sort(by_id.begin(), by_id.end(), [&](auto a, auto b) { return m.ids()[a] < m.ids()[b]; });
  const Matrix sorted_unit = unit(by_id, Eigen::all);

  Snapshot s;
  s.timestamp_index = m.timestamp_index();
  s.timestamp_label = m.timestamp_label();
  std::vector<double> sims(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j)
      sims[j] = std::clamp(sorted_unit.row(static_cast<Eigen::Index>(i)).dot(sorted_unit.row(static_cast<Eigen::Index>(j))), -1.0, 1.0);
    auto nbrs = top_k(sims, k, i);
    std::sort(nbrs.begin(), nbrs.end());
    for (auto j : nbrs) s.edges.push_back({m.ids()[by_id[i]], m.ids()[by_id[j]], sims[j]});
  }
  s.nodes = m.ids();
  std::sort(s.nodes.begin(), s.nodes.end());
  return s;
}

}  // namespace trajviz
