#include "trajviz/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace trajviz {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kSidecarFormat = "trajviz.provenance";

}  // namespace

const std::vector<OptionSpec>& option_table() {
  using T = OptionType;
  static const std::vector<OptionSpec> table = {
      {"out-dir", "/out_dir", T::path, "directory for all artifacts"},
      {"seed", "/seed", T::uint, "seed for training, t-SNE and anchor sampling"},
      {"threads", "/threads", T::uint, "worker threads (0 = all cores, 1 = single-threaded)"},
      // input
      {"manifest", "/input/manifest", T::path, "snapshot manifest (JSON array)"},
      {"snapshot", "/input/snapshots", T::path_list, "edge-list snapshot file (repeatable)"},
      {"events", "/input/event_log", T::path, "event log (JSON lines)"},
      {"interval", "/input/interval", T::real, "bucket width for event logs"},
      {"origin", "/input/origin", T::real, "start of the first event bucket"},
      {"directed", "/input/directed", T::boolean, "treat edges as directed"},
      // artifact locations
      {"graph", "/artifacts/graph", T::path, "graph artifact (default OUT/graph.json)"},
      {"embeddings", "/artifacts/embeddings", T::path, "embeddings artifact (default OUT/embeddings)"},
      {"trajectories", "/artifacts/trajectories", T::path, "trajectory artifact (default OUT/trajectories.json)"},
      // embeddings
      {"embeddings-from", "/embeddings/path", T::path, "load precomputed embeddings from this directory"},
      {"dim", "/training/dim", T::uint, "embedding dimension"},
      {"epochs", "/training/epochs", T::uint, "training epochs per snapshot"},
      {"learning-rate", "/training/learning_rate", T::real, "initial SGD learning rate"},
      {"min-learning-rate", "/training/min_learning_rate", T::real, "final SGD learning rate"},
      {"negatives", "/training/negatives", T::uint, "negative samples per positive pair"},
      {"walks-per-node", "/training/walks_per_node", T::uint, "random walks started per node"},
      {"walk-length", "/training/walk_length", T::uint, "random walk length"},
      {"window", "/training/window", T::uint, "skip-gram window"},
      {"lambda-link", "/training/lambda_link", T::real, "weight of the link-prediction loss"},
      {"lambda-node", "/training/lambda_node", T::real, "weight of the node-attribute loss"},
      {"lambda-edge", "/training/lambda_edge", T::real, "weight of the edge-weight loss"},
      {"embedding-format", "/outputs/embeddings_format", T::string, "text | binary"},
      // projection
      {"method", "/projection/method", T::string, "pca | tsne"},
      {"perplexity", "/projection/perplexity", T::real, "t-SNE perplexity"},
      {"tsne-iterations", "/projection/iterations", T::uint, "t-SNE iterations"},
      {"early-exaggeration", "/projection/early_exaggeration", T::real, "t-SNE early exaggeration factor"},
      {"early-exaggeration-iters", "/projection/early_exaggeration_iters", T::uint, "t-SNE early exaggeration iterations"},
      {"tsne-learning-rate", "/projection/learning_rate", T::real, "t-SNE learning rate (0 = automatic)"},
      // alignment
      {"k", "/alignment/k", T::uint, "anchor neighbours per node"},
      {"alpha", "/alignment/alpha", T::real, "anchor interpolation factor"},
      {"aggregation", "/alignment/aggregation", T::string, "mean | softmax"},
      {"tau", "/alignment/tau", T::real, "softmax temperature"},
      {"anchor-strategy", "/alignment/anchor_strategy", T::string, "auto | all_v0 | top_degree | random"},
      {"anchor-cap", "/alignment/anchor_cap", T::uint, "maximum anchors for top_degree / random"},
      {"reference-t", "/alignment/reference_t", T::uint, "snapshot the anchor embeddings are taken from"},
      // metrics
      {"jaccard-n", "/metrics/n", T::uint, "Jaccard neighbourhood depth"},
      {"rbo-m", "/metrics/m", T::uint, "RBO depth"},
      {"rbo-p", "/metrics/p", T::real, "RBO damping"},
      {"space", "/metrics/space", T::string, "raw_embedding | projected_2d"},
      {"movement", "/metrics/movement", T::string, "raw | unit_normalized | projected"},
      // render
      {"width", "/render/width", T::uint, "canvas width (px)"},
      {"height", "/render/height", T::uint, "canvas height (px)"},
      {"highlight", "/render/highlight", T::string_list, "node label to draw a trajectory for (repeatable)"},
      {"color", "/render/colors", T::string_list, "#RRGGBB colour per highlight (repeatable)"},
      {"background-color", "/render/background_color", T::string, "anchor scatter colour"},
      {"background-opacity", "/render/background_opacity", T::real, "anchor scatter opacity"},
      {"background-radius", "/render/background_radius", T::real, "anchor scatter radius"},
      {"show-timestamps", "/render/show_timestamps", T::boolean, "label trajectory points with timestamps"},
      {"stride", "/render/stride", T::uint, "keep every n-th trajectory point"},
      {"html", "/outputs/html", T::boolean, "also write plot.html"},
      {"svg", "/outputs/svg", T::boolean, "write plot.svg"},
      {"metrics-json", "/outputs/metrics_json", T::boolean, "also write metrics.json"},
  };
  return table;
}

std::string env_name(const OptionSpec& opt) {
  std::string out = "TRAJVIZ_";
  for (char c : opt.flag) out += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

json default_config() {
  const TrainingConfig tc;
  const TsneConfig ts;
  const AlignmentConfig ac;
  const MetricConfig mc;
  const PlotSpec ps;
  return {
      {"seed", 42},
      {"threads", 0},
      {"out_dir", "out"},
      {"input",
       {{"manifest", nullptr},
        {"snapshots", json::array()},
        {"event_log", nullptr},
        {"interval", nullptr},
        {"origin", 0.0},
        {"directed", false}}},
      {"artifacts", {{"graph", nullptr}, {"embeddings", nullptr}, {"trajectories", nullptr}}},
      {"embeddings", {{"source", "train"}, {"path", nullptr}}},
      {"training",
       {{"dim", tc.dim},
        {"epochs", tc.epochs},
        {"learning_rate", tc.learning_rate},
        {"min_learning_rate", tc.min_learning_rate},
        {"negatives", tc.negatives},
        {"walks_per_node", tc.walks_per_node},
        {"walk_length", tc.walk_length},
        {"window", tc.window},
        {"lambda_link", tc.lambda_link},
        {"lambda_node", tc.lambda_node},
        {"lambda_edge", tc.lambda_edge}}},
      {"projection",
       {{"method", "tsne"},
        {"perplexity", ts.perplexity},
        {"iterations", ts.iterations},
        {"early_exaggeration", ts.early_exaggeration},
        {"early_exaggeration_iters", ts.early_exaggeration_iters},
        {"learning_rate", ts.learning_rate},
        {"initial_momentum", ts.initial_momentum},
        {"final_momentum", ts.final_momentum},
        {"momentum_switch_iter", ts.momentum_switch_iter}}},
      {"alignment",
       {{"k", ac.k},
        {"alpha", ac.alpha},
        {"aggregation", to_string(ac.aggregation)},
        {"tau", ac.tau},
        {"anchor_strategy", "auto"},
        {"anchor_cap", ac.anchor_cap},
        {"reference_t", ac.reference_t}}},
      {"metrics",
       {{"n", mc.n}, {"m", mc.m}, {"p", mc.p}, {"space", to_string(mc.space)}, {"movement", to_string(mc.movement)}}},
      {"render",
       {{"width", ps.width},
        {"height", ps.height},
        {"highlight", json::array()},
        {"colors", json::array()},
        {"background_color", ps.background_color},
        {"background_opacity", ps.background_opacity},
        {"background_radius", ps.background_radius},
        {"show_timestamps", ps.show_timestamps},
        {"stride", ps.stride}}},
      {"outputs", {{"svg", true}, {"html", true}, {"metrics_json", true}, {"embeddings_format", "text"}}},
  };
}

namespace {

// Config keys holding filesystem paths; relative values are resolved against
// the config file's directory (or the working directory for flags).
const std::vector<std::string>& path_pointers() {
  static const std::vector<std::string> p = {"/out_dir",          "/input/manifest",        "/input/snapshots",
                                             "/input/event_log",  "/artifacts/graph",       "/artifacts/embeddings",
                                             "/artifacts/trajectories", "/embeddings/path"};
  return p;
}

std::string resolve_path(const fs::path& base, const std::string& value) {
  fs::path p(value);
  if (p.is_relative()) p = base / p;
  return p.lexically_normal().string();
}

}  // namespace

void resolve_paths(json& config, const fs::path& base) {
  for (const auto& ptr : path_pointers()) {
    json::json_pointer jp(ptr);
    if (!config.contains(jp)) continue;
    auto& v = config[jp];
    if (v.is_string()) v = resolve_path(base, v.get<std::string>());
    else if (v.is_array())
      for (auto& e : v)
        if (e.is_string()) e = resolve_path(base, e.get<std::string>());
  }
}

namespace {

// Recursive overlay that, unlike merge_patch, keeps explicit nulls (so an
// unset seed is reported rather than silently defaulted).
void overlay(json& base, const json& patch) {
  if (!base.is_object() || !patch.is_object()) {
    base = patch;
    return;
  }
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    if (base.contains(it.key()) && base[it.key()].is_object() && it.value().is_object())
      overlay(base[it.key()], it.value());
    else
      base[it.key()] = it.value();
  }
}

std::string read_all(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw ValidationError("missing input: cannot read '" + p.string() + "'");
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

}  // namespace

json read_config_file(const fs::path& file) {
  json j;
  try {
    j = json::parse(read_all(file));
  } catch (const json::parse_error& e) {
    throw UsageError("config '" + file.string() + "': " + e.what());
  }
  if (!j.is_object()) throw UsageError("config '" + file.string() + "' must be a JSON object");
  if (j.value("format", "") == kSidecarFormat) {
    if (!j.contains("config") || !j["config"].is_object())
      throw UsageError("provenance file '" + file.string() + "' has no recorded config");
    return j["config"];
  }
  resolve_paths(j, fs::absolute(file).parent_path());
  json out = default_config();
  overlay(out, j);
  return out;
}

namespace {

bool parse_bool(const std::string& flag, const std::string& v) {
  std::string s;
  for (char c : v) s += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw UsageError("--" + flag + ": expected a boolean, got '" + v + "'");
}

std::uint64_t parse_uint(const std::string& flag, const std::string& v) {
  std::size_t used = 0;
  unsigned long long x = 0;
  try {
    if (v.empty() || v[0] == '-' || v[0] == '+') throw std::invalid_argument("sign");
    x = std::stoull(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw UsageError("--" + flag + ": expected a non-negative integer, got '" + v + "'");
  return x;
}

double parse_real(const std::string& flag, const std::string& v) {
  std::size_t used = 0;
  double x = 0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size() || !std::isfinite(x))
    throw UsageError("--" + flag + ": expected a finite number, got '" + v + "'");
  return x;
}

}  // namespace

void apply_overrides(json& config, const RawOverrides& values) {
  for (const auto& opt : option_table()) {
    auto it = values.find(opt.flag);
    if (it == values.end() || it->second.empty()) continue;
    const auto& vals = it->second;
    json::json_pointer jp(opt.json_pointer);
    const std::string& last = vals.back();
    switch (opt.type) {
      case OptionType::string: config[jp] = last; break;
      case OptionType::path: config[jp] = fs::absolute(last).lexically_normal().string(); break;
      case OptionType::uint: config[jp] = parse_uint(opt.flag, last); break;
      case OptionType::real: config[jp] = parse_real(opt.flag, last); break;
      case OptionType::boolean: config[jp] = parse_bool(opt.flag, last); break;
      case OptionType::string_list: config[jp] = vals; break;
      case OptionType::path_list: {
        json arr = json::array();
        for (const auto& v : vals) arr.push_back(fs::absolute(v).lexically_normal().string());
        config[jp] = arr;
        break;
      }
    }
    // Pointing at precomputed embeddings switches the source.
    if (opt.flag == "embeddings-from") config["embeddings"]["source"] = "load";
  }
}

RawOverrides environment_overrides(const std::map<std::string, std::string>& env) {
  RawOverrides out;
  for (const auto& opt : option_table()) {
    auto it = env.find(env_name(opt));
    if (it == env.end()) continue;
    if (opt.type == OptionType::string_list || opt.type == OptionType::path_list) {
      std::vector<std::string> parts;
      std::stringstream ss(it->second);
      for (std::string part; std::getline(ss, part, ',');)
        if (!part.empty()) parts.push_back(part);
      out[opt.flag] = parts;
    } else {
      out[opt.flag] = {it->second};
    }
  }
  return out;
}

namespace {

// Strict reader over one config object: every key must be consumed.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw UsageError("config: " + where() + " must be an object");
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) throw UsageError("config: " + where(key) + " is missing");
    return j_.at(key);
  }
  bool is_null(const std::string& key) { return raw(key).is_null(); }

  std::uint64_t uint(const std::string& key) {
    const auto& v = raw(key);
    if (v.is_null()) throw UsageError("config: " + where(key) + " is unset");
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
      throw UsageError("config: " + where(key) + " must be a non-negative integer");
    return v.get<std::uint64_t>();
  }
  double real(const std::string& key) {
    const auto& v = raw(key);
    if (!v.is_number() || !std::isfinite(v.get<double>()))
      throw UsageError("config: " + where(key) + " must be a finite number");
    return v.get<double>();
  }
  bool boolean(const std::string& key) {
    const auto& v = raw(key);
    if (!v.is_boolean()) throw UsageError("config: " + where(key) + " must be true or false");
    return v.get<bool>();
  }
  std::string string(const std::string& key) {
    const auto& v = raw(key);
    if (!v.is_string()) throw UsageError("config: " + where(key) + " must be a string");
    return v.get<std::string>();
  }
  std::optional<std::string> optional_string(const std::string& key) {
    const auto& v = raw(key);
    if (v.is_null()) return std::nullopt;
    if (!v.is_string()) throw UsageError("config: " + where(key) + " must be a string or null");
    return v.get<std::string>();
  }
  std::vector<std::string> strings(const std::string& key) {
    const auto& v = raw(key);
    if (!v.is_array()) throw UsageError("config: " + where(key) + " must be an array of strings");
    std::vector<std::string> out;
    for (const auto& e : v) {
      if (!e.is_string()) throw UsageError("config: " + where(key) + " must be an array of strings");
      out.push_back(e.get<std::string>());
    }
    return out;
  }
  Section child(const std::string& key) { return Section(raw(key), name_ + "/" + key); }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw UsageError("config: unknown key " + where(it.key()));
  }

 private:
  std::string where(const std::string& key = "") const {
    auto s = name_.empty() ? std::string("/") : name_;
    if (!key.empty()) s = (name_.empty() ? "" : name_) + "/" + key;
    return "'" + s + "'";
  }

  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

unsigned to_threads(std::uint64_t v) {
  if (v > 1024) throw UsageError("config: '/threads' must be at most 1024");
  return static_cast<unsigned>(v);
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const json& config) {
  PipelineConfig c;
  c.effective = config;
  Section root(config, "");

  if (root.is_null("seed")) throw UsageError("config: '/seed' is unset; seeds are required for reproducibility");
  c.seed = root.uint("seed");
  c.threads = to_threads(root.uint("threads"));
  c.out_dir = root.string("out_dir");
  if (c.out_dir.empty()) throw UsageError("config: '/out_dir' must not be empty");

  {
    auto in = root.child("input");
    if (auto m = in.optional_string("manifest")) c.input.manifest = *m;
    for (const auto& s : in.strings("snapshots")) c.input.snapshots.emplace_back(s);
    if (auto e = in.optional_string("event_log")) c.input.event_log = *e;
    if (!in.is_null("interval")) c.input.interval = in.real("interval");
    c.input.origin = in.real("origin");
    c.input.directed = in.boolean("directed");
    in.finish();
  }
  {
    auto a = root.child("artifacts");
    auto pick = [&](const char* key, const char* fallback) {
      auto v = a.optional_string(key);
      return v ? fs::path(*v) : c.out_dir / fallback;
    };
    c.graph_path = pick("graph", "graph.json");
    c.embeddings_dir = pick("embeddings", "embeddings");
    c.trajectories_path = pick("trajectories", "trajectories.json");
    a.finish();
  }

  TrainingConfig tc;
  {
    auto t = root.child("training");
    tc.dim = t.uint("dim");
    tc.epochs = t.uint("epochs");
    tc.learning_rate = t.real("learning_rate");
    tc.min_learning_rate = t.real("min_learning_rate");
    tc.negatives = t.uint("negatives");
    tc.walks_per_node = t.uint("walks_per_node");
    tc.walk_length = t.uint("walk_length");
    tc.window = t.uint("window");
    tc.lambda_link = t.real("lambda_link");
    tc.lambda_node = t.real("lambda_node");
    tc.lambda_edge = t.real("lambda_edge");
    t.finish();
    tc.seed = c.seed;
    tc.threads = c.threads;
    tc.validate();
  }
  {
    auto e = root.child("embeddings");
    const auto source = e.string("source");
    auto path = e.optional_string("path");
    e.finish();
    if (source == "train") {
      if (path) throw UsageError("config: '/embeddings/path' is set but '/embeddings/source' is \"train\"");
      c.training = tc;
    } else if (source == "load") {
      if (!path) throw UsageError("config: '/embeddings/source' is \"load\" but '/embeddings/path' is unset");
      c.external_embeddings = *path;
    } else {
      throw UsageError("config: '/embeddings/source' must be \"train\" or \"load\"");
    }
  }
  {
    auto p = root.child("projection");
    c.projection.method = parse_projection_method(p.string("method"));
    auto& ts = c.projection.tsne;
    ts.perplexity = p.real("perplexity");
    ts.iterations = p.uint("iterations");
    ts.early_exaggeration = p.real("early_exaggeration");
    ts.early_exaggeration_iters = p.uint("early_exaggeration_iters");
    ts.learning_rate = p.real("learning_rate");
    ts.initial_momentum = p.real("initial_momentum");
    ts.final_momentum = p.real("final_momentum");
    ts.momentum_switch_iter = p.uint("momentum_switch_iter");
    p.finish();
    ts.seed = c.seed;
    ts.threads = c.threads;
    if (ts.iterations < ts.early_exaggeration_iters)
      throw UsageError("config: t-SNE iterations must be >= early_exaggeration_iters");
    if (!(ts.perplexity > 0.0)) throw UsageError("config: t-SNE perplexity must be > 0");
    if (ts.learning_rate < 0.0) throw UsageError("config: t-SNE learning_rate must be >= 0");
  }
  {
    auto a = root.child("alignment");
    auto& ac = c.alignment;
    ac.k = a.uint("k");
    ac.alpha = a.real("alpha");
    ac.aggregation = parse_aggregation(a.string("aggregation"));
    ac.tau = a.real("tau");
    const auto strategy = a.string("anchor_strategy");
    if (strategy != "auto") ac.anchor_strategy = parse_anchor_strategy(strategy);
    ac.anchor_cap = a.uint("anchor_cap");
    ac.reference_t = a.uint("reference_t");
    a.finish();
    ac.anchor_seed = c.seed;
    ac.threads = c.threads;
    ac.validate();
  }
  {
    auto m = root.child("metrics");
    auto& mc = c.metrics;
    mc.n = m.uint("n");
    mc.m = m.uint("m");
    mc.p = m.real("p");
    mc.space = parse_neighbor_space(m.string("space"));
    mc.movement = parse_movement_variant(m.string("movement"));
    m.finish();
    mc.threads = c.threads;
    mc.validate();
  }
  {
    auto r = root.child("render");
    auto& ps = c.plot;
    const auto w = r.uint("width"), h = r.uint("height");
    if (w > 100000 || h > 100000) throw UsageError("config: canvas size is too large");
    ps.width = static_cast<int>(w);
    ps.height = static_cast<int>(h);
    const auto labels = r.strings("highlight");
    const auto colors = r.strings("colors");
    if (colors.size() > labels.size()) throw UsageError("config: more colours than highlighted nodes");
    for (std::size_t i = 0; i < labels.size(); ++i) ps.highlights.push_back({labels[i], i < colors.size() ? colors[i] : ""});
    ps.background_color = r.string("background_color");
    ps.background_opacity = r.real("background_opacity");
    ps.background_radius = r.real("background_radius");
    ps.show_timestamps = r.boolean("show_timestamps");
    ps.stride = r.uint("stride");
    r.finish();
    ps.validate();
  }
  {
    auto o = root.child("outputs");
    c.outputs.svg = o.boolean("svg");
    c.outputs.html = o.boolean("html");
    c.outputs.metrics_json = o.boolean("metrics_json");
    const auto fmt = o.string("embeddings_format");
    if (fmt == "text") c.outputs.embeddings_format = EmbeddingFormat::text;
    else if (fmt == "binary") c.outputs.embeddings_format = EmbeddingFormat::binary;
    else throw UsageError("config: '/outputs/embeddings_format' must be \"text\" or \"binary\"");
    o.finish();
  }
  root.finish();
  return c;
}

// --- provenance ------------------------------------------------------------

fs::path sidecar_path(const fs::path& artifact) {
  auto p = artifact.lexically_normal();
  if (!p.has_filename()) p = p.parent_path();
  return p.string() + ".provenance.json";
}

namespace {

json hash_entry(const fs::path& p) {
  return {{"path", p.string()}, {"fnv1a64", hex64(fnv1a64(read_all(p)))}};
}

void write_sidecar(const PipelineConfig& cfg, const std::string& stage, const fs::path& artifact,
                   const std::vector<fs::path>& inputs, const Artifacts& outputs,
                   const std::vector<std::string>& warnings = {}) {
  json in = json::array(), out = json::array();
  for (const auto& p : inputs) in.push_back(hash_entry(p));
  for (const auto& p : outputs) out.push_back(hash_entry(p));
  json j = {{"format", kSidecarFormat},
            {"version", 1},
            {"tool", "trajviz"},
            {"tool_version", TRAJVIZ_VERSION},
            {"stage", stage},
            {"config_hash", hex64(fnv1a64(cfg.effective.dump()))},
            {"config", cfg.effective},
            {"inputs", in},
            {"outputs", out},
            {"warnings", warnings}};
  std::ofstream f(sidecar_path(artifact), std::ios::binary);
  if (!f) throw ValidationError("cannot write '" + sidecar_path(artifact).string() + "'");
  f << j.dump(2) << '\n';
}

void require_file(const fs::path& p, const std::string& what) {
  if (!fs::is_regular_file(p)) throw ValidationError("missing " + what + ": '" + p.string() + "' does not exist");
}

std::vector<fs::path> require_embeddings(const fs::path& dir) {
  if (!fs::is_directory(dir))
    throw ValidationError("missing embeddings artifact: '" + dir.string() + "' does not exist");
  return list_embedding_files(dir);
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

DynamicGraph read_graph(const PipelineConfig& cfg) {
  require_file(cfg.graph_path, "graph artifact");
  return load_graph(cfg.graph_path);
}

}  // namespace

Artifacts cmd_ingest(const PipelineConfig& cfg) {
  const auto& in = cfg.input;
  const int kinds = (in.manifest ? 1 : 0) + (in.snapshots.empty() ? 0 : 1) + (in.event_log ? 1 : 0);
  if (kinds != 1) throw UsageError("ingest needs exactly one input: a manifest, snapshot files, or an event log");

  DynamicGraph g;
  std::vector<fs::path> inputs;
  std::vector<std::string> warnings;
  if (in.manifest) {
    require_file(*in.manifest, "manifest");
    auto sources = read_manifest(*in.manifest);
    inputs.push_back(*in.manifest);
    for (const auto& s : sources) {
      inputs.push_back(s.path);
      if (s.node_attributes) inputs.push_back(*s.node_attributes);
    }
    auto r = parse_snapshots(std::move(sources), in.directed, cfg.threads);
    g = std::move(r.graph);
    warnings = std::move(r.warnings);
  } else if (!in.snapshots.empty()) {
    for (const auto& p : in.snapshots) require_file(p, "snapshot file");
    auto r = parse_snapshots(in.snapshots, in.directed, cfg.threads);
    g = std::move(r.graph);
    warnings = std::move(r.warnings);
    inputs = in.snapshots;
  } else {
    require_file(*in.event_log, "event log");
    if (!in.interval) throw UsageError("an event log needs --interval");
    g = discretize_events(read_event_log(*in.event_log), *in.interval, in.directed, in.origin);
    inputs.push_back(*in.event_log);
  }

  const auto report = validate(g);
  if (!report.ok()) {
    std::string msg = "graph validation failed:";
    for (const auto& b : report.breaches) msg += "\n  " + b;
    throw ValidationError(msg);
  }
  warnings.insert(warnings.end(), report.warnings.begin(), report.warnings.end());

  ensure_parent(cfg.graph_path);
  save_graph(g, cfg.graph_path);
  write_sidecar(cfg, "ingest", cfg.graph_path, inputs, {cfg.graph_path}, warnings);
  return {cfg.graph_path};
}

Artifacts cmd_embed(const PipelineConfig& cfg) {
  const auto g = read_graph(cfg);
  std::vector<fs::path> inputs = {cfg.graph_path};
  EmbeddingSeries series;
  if (cfg.training) {
    const auto& tc = *cfg.training;
    NodeTargets targets;
    if (tc.lambda_node > 0.0) targets = node_targets_from(g);
    series = train_series(g, tc, tc.lambda_node > 0.0 ? &targets : nullptr, tc.lambda_edge > 0.0);
  } else {
    auto files = require_embeddings(*cfg.external_embeddings);
    series = load_embeddings(files, &g);
    inputs.insert(inputs.end(), files.begin(), files.end());
  }

  // Drop files from an earlier run so the directory matches this series.
  if (fs::is_directory(cfg.embeddings_dir))
    for (const auto& entry : fs::directory_iterator(cfg.embeddings_dir)) {
      const auto ext = entry.path().extension();
      if (entry.is_regular_file() && (ext == ".emb" || ext == ".bin")) fs::remove(entry.path());
    }
  fs::create_directories(cfg.embeddings_dir);
  auto written = save_embeddings(series, cfg.embeddings_dir, cfg.outputs.embeddings_format);
  write_sidecar(cfg, "embed", cfg.embeddings_dir, inputs, written);
  return written;
}

Artifacts cmd_trajectory(const PipelineConfig& cfg) {
  const auto g = read_graph(cfg);
  const auto files = require_embeddings(cfg.embeddings_dir);
  const auto series = load_embeddings(files, &g);
  const auto anchors = select_anchors(g, series, cfg.alignment, cfg.projection);
  const auto traj = compute_trajectories(g, series, anchors, cfg.alignment);

  ensure_parent(cfg.trajectories_path);
  export_json(traj, cfg.trajectories_path);
  std::vector<fs::path> inputs = {cfg.graph_path};
  inputs.insert(inputs.end(), files.begin(), files.end());
  write_sidecar(cfg, "trajectory", cfg.trajectories_path, inputs, {cfg.trajectories_path}, traj.meta.warnings);
  return {cfg.trajectories_path};
}

Artifacts cmd_analyze(const PipelineConfig& cfg) {
  const auto files = require_embeddings(cfg.embeddings_dir);
  const auto g = read_graph(cfg);
  const auto series = load_embeddings(files, &g);
  std::vector<fs::path> inputs = {cfg.graph_path};
  inputs.insert(inputs.end(), files.begin(), files.end());

  std::optional<TrajectorySet> traj;
  if (cfg.metrics.space == NeighborSpace::projected_2d || cfg.metrics.movement == MovementVariant::projected) {
    require_file(cfg.trajectories_path, "trajectory artifact");
    traj = import_json(cfg.trajectories_path);
    inputs.push_back(cfg.trajectories_path);
  }
  const auto report = compute_report(series, traj ? &*traj : nullptr, cfg.metrics);

  const auto csv = cfg.out_dir / "metrics.csv";
  fs::create_directories(cfg.out_dir);
  export_csv(report, csv);
  Artifacts out = {csv};
  if (cfg.outputs.metrics_json) {
    const auto js = cfg.out_dir / "metrics.json";
    export_summary_json(report, js);
    out.push_back(js);
  }
  write_sidecar(cfg, "analyze", csv, inputs, out);
  return out;
}

Artifacts cmd_render(const PipelineConfig& cfg) {
  require_file(cfg.trajectories_path, "trajectory artifact");
  const auto traj = import_json(cfg.trajectories_path);
  if (!cfg.outputs.svg && !cfg.outputs.html) throw UsageError("render: both svg and html outputs are disabled");

  fs::create_directories(cfg.out_dir);
  Artifacts out;
  if (cfg.outputs.svg) {
    emit_svg(traj, cfg.plot, cfg.out_dir / "plot.svg");
    out.push_back(cfg.out_dir / "plot.svg");
  }
  if (cfg.outputs.html) {
    emit_html(traj, cfg.plot, cfg.out_dir / "plot.html");
    out.push_back(cfg.out_dir / "plot.html");
  }
  write_sidecar(cfg, "render", out.front(), {cfg.trajectories_path}, out);
  return out;
}

Artifacts cmd_pipeline(const PipelineConfig& cfg) {
  Artifacts all;
  for (auto* stage : {cmd_ingest, cmd_embed, cmd_trajectory, cmd_analyze, cmd_render}) {
    auto a = stage(cfg);
    all.insert(all.end(), a.begin(), a.end());
  }
  return all;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const UsageError*>(&e)) return 1;
  if (dynamic_cast<const NumericError*>(&e)) return 3;
  return 2;  // ValidationError, I/O and malformed-data errors
}

}  // namespace trajviz
