#include "trajviz/render.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace trajviz {

namespace {

bool is_hex_color(std::string_view c) {
  if (c.size() != 7 || c[0] != '#') return false;
  return std::all_of(c.begin() + 1, c.end(), [](char ch) { return std::isxdigit(static_cast<unsigned char>(ch)); });
}

// Shortest round-trip text, so on-canvas geometry is exactly the mapped one.
std::string fx(double v) { return format_double(v == 0.0 ? 0.0 : v); }

std::string xml_escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out += c;
    }
  }
  return out;
}

void write_text(const std::filesystem::path& out, const std::string& text) {
  if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
  std::ofstream f(out, std::ios::binary);
  if (!f) throw ValidationError("cannot write " + out.string());
  f << text;
  if (!f) throw ValidationError("write failed for " + out.string());
}

struct ResolvedHighlight {
  NodeId id;
  std::string label;
  std::string color;
};

std::vector<ResolvedHighlight> resolve_highlights(const TrajectorySet& set, const PlotSpec& spec) {
  std::vector<ResolvedHighlight> out;
  const auto& palette = default_palette();
  for (std::size_t i = 0; i < spec.highlights.size(); ++i) {
    const auto& h = spec.highlights[i];
    auto it = std::find(set.labels.begin(), set.labels.end(), h.label);
    if (it == set.labels.end()) throw ValidationError("highlight label '" + h.label + "' is not in the trajectory set");
    auto id = static_cast<NodeId>(it - set.labels.begin());
    out.push_back({id, h.label, h.color.empty() ? palette[i % palette.size()] : h.color});
  }
  return out;
}

void check_size(const TrajectorySet& set) {
  if (set.num_points() == 0 && set.anchors.empty()) throw ValidationError("nothing to render: no positions");
  if (set.num_points() > kMaxRenderedPoints)
    throw ValidationError("trajectory set has " + std::to_string(set.num_points()) + " points (limit " +
                          std::to_string(kMaxRenderedPoints) + "); decimate first");
}

CanvasMapping fit(const TrajectorySet& set, const std::vector<ResolvedHighlight>& hl, const PlotSpec& spec) {
  double lo_x = std::numeric_limits<double>::infinity(), lo_y = lo_x;
  double hi_x = -lo_x, hi_y = -lo_x;
  auto add = [&](double x, double y) {
    lo_x = std::min(lo_x, x), hi_x = std::max(hi_x, x);
    lo_y = std::min(lo_y, y), hi_y = std::max(hi_y, y);
  };
  for (const auto& a : set.anchors) add(a.x, a.y);
  for (const auto& h : hl)
    for (const auto& p : set.points[h.id]) add(p.x, p.y);
  if (!std::isfinite(lo_x))  // no anchors, no highlights: frame everything
    for (const auto& pts : set.points)
      for (const auto& p : pts) add(p.x, p.y);
  if (!std::isfinite(lo_x)) lo_x = lo_y = hi_x = hi_y = 0.0;
  return CanvasMapping(lo_x, lo_y, hi_x, hi_y, spec.width, spec.height);
}

}  // namespace

const std::vector<std::string>& default_palette() {
  static const std::vector<std::string> p = {"#E6194B", "#3CB44B", "#4363D8", "#F58231", "#911EB4", "#42D4F4",
                                             "#F032E6", "#9A6324", "#469990", "#800000", "#808000", "#000075"};
  return p;
}

void PlotSpec::validate() const {
  if (width < 100 || height < 100) throw UsageError("plot width and height must be at least 100");
  if (stride < 1) throw UsageError("stride must be >= 1");
  if (!is_hex_color(background_color)) throw UsageError("background colour must be #RRGGBB");
  if (!(background_opacity >= 0.0 && background_opacity <= 1.0)) throw UsageError("background opacity must be in [0, 1]");
  if (!(background_radius > 0.0)) throw UsageError("background radius must be > 0");
  for (const auto& h : highlights)
    if (!h.color.empty() && !is_hex_color(h.color))
      throw UsageError("highlight colour '" + h.color + "' must be #RRGGBB");
}

CanvasMapping::CanvasMapping(double min_x, double min_y, double max_x, double max_y, int width, int height)
    : cx_((min_x + max_x) / 2), cy_((min_y + max_y) / 2), width_(width), height_(height) {
  double rx = max_x - min_x, ry = max_y - min_y;
  if (!(rx > 0.0) && !(ry > 0.0)) rx = ry = 1.0;  // single point: unit box around it
  const double avail_w = width * 0.9, avail_h = height * 0.9;
  scale_ = std::min(rx > 0.0 ? avail_w / rx : std::numeric_limits<double>::infinity(),
                    ry > 0.0 ? avail_h / ry : std::numeric_limits<double>::infinity());
}

Point2 CanvasMapping::map(double x, double y) const {
  return {width_ / 2 + (x - cx_) * scale_, height_ / 2 - (y - cy_) * scale_};
}

TrajectorySet decimate(const TrajectorySet& set, std::size_t stride) {
  if (stride < 1) throw UsageError("stride must be >= 1");
  if (stride == 1) return set;
  TrajectorySet out = set;
  for (auto& pts : out.points) {
    std::vector<TrajectoryPoint> kept;
    for (std::size_t i = 0; i < pts.size(); ++i)
      if (i % stride == 0 || i + 1 == pts.size()) kept.push_back(pts[i]);
    pts = std::move(kept);
  }
  return out;
}

std::string render_svg(const TrajectorySet& input, const PlotSpec& spec, std::optional<std::size_t> up_to,
                       bool standalone, const std::string& id_prefix) {
  spec.validate();
  const TrajectorySet set = decimate(input, spec.stride);
  check_size(set);
  const auto hl = resolve_highlights(set, spec);
  const CanvasMapping map = fit(set, hl, spec);

  std::ostringstream s;
  const auto W = std::to_string(spec.width), H = std::to_string(spec.height);
  if (standalone) s << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" ";
  else s << "<svg ";
  s << "width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n";

  s << "<defs>\n";
  for (std::size_t i = 0; i < hl.size(); ++i)
    s << "<marker id=\"" << id_prefix << "arrow-" << i
      << "\" viewBox=\"0 0 10 10\" refX=\"8\" refY=\"5\" markerWidth=\"6\" markerHeight=\"6\" orient=\"auto\">"
      << "<path d=\"M 0 0 L 10 5 L 0 10 z\" fill=\"" << hl[i].color << "\"/></marker>\n";
  s << "</defs>\n";
  s << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"#FFFFFF\"/>\n";

  s << "<g class=\"anchors\" fill=\"" << spec.background_color << "\" fill-opacity=\"" << fx(spec.background_opacity)
    << "\">\n";
  for (const auto& a : set.anchors) {
    auto p = map.map(a.x, a.y);
    s << "<circle cx=\"" << fx(p[0]) << "\" cy=\"" << fx(p[1]) << "\" r=\"" << fx(spec.background_radius) << "\"/>\n";
  }
  s << "</g>\n<g class=\"trajectories\">\n";
  for (std::size_t i = 0; i < hl.size(); ++i) {
    std::vector<TrajectoryPoint> pts;
    for (const auto& p : set.points[hl[i].id])
      if (!up_to || p.t <= *up_to) pts.push_back(p);
    if (pts.empty()) continue;
    const auto& color = hl[i].color;
    if (pts.size() == 1) {
      auto p = map.map(pts[0].x, pts[0].y);
      s << "<circle cx=\"" << fx(p[0]) << "\" cy=\"" << fx(p[1]) << "\" r=\"4\" fill=\"" << color << "\"/>\n";
    } else {
      s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" marker-mid=\"url(#" << id_prefix
        << "arrow-" << i << ")\" marker-end=\"url(#" << id_prefix << "arrow-" << i << ")\" points=\"";
      for (std::size_t j = 0; j < pts.size(); ++j) {
        auto p = map.map(pts[j].x, pts[j].y);
        s << (j ? " " : "") << fx(p[0]) << ',' << fx(p[1]);
      }
      s << "\"/>\n";
    }
    if (spec.show_timestamps)
      for (const auto& tp : pts) {
        auto p = map.map(tp.x, tp.y);
        const auto& lbl = tp.t < set.meta.timestamp_labels.size() ? set.meta.timestamp_labels[tp.t] : std::to_string(tp.t);
        s << "<text class=\"timestamp\" x=\"" << fx(p[0] + 4) << "\" y=\"" << fx(p[1] + 12)
          << "\" font-size=\"9\" fill=\"#555555\">" << xml_escape(lbl) << "</text>\n";
      }
    auto end = map.map(pts.back().x, pts.back().y);
    s << "<text class=\"label\" x=\"" << fx(end[0] + 6) << "\" y=\"" << fx(end[1] - 6)
      << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"" << color << "\">" << xml_escape(hl[i].label)
      << "</text>\n";
  }
  s << "</g>\n</svg>\n";
  return s.str();
}

namespace {

RenderSummary summarize(const std::string& text) {
  RenderSummary r;
  r.bytes = text.size();
  for (std::size_t pos = 0; (pos = text.find("<polyline", pos)) != std::string::npos; ++pos) ++r.polylines;
  for (std::size_t pos = 0; (pos = text.find("<circle", pos)) != std::string::npos; ++pos) ++r.circles;
  for (std::size_t pos = 0; (pos = text.find("<svg", pos)) != std::string::npos; ++pos) ++r.frames;
  return r;
}

constexpr std::string_view kDataOpen = "<script type=\"application/json\" id=\"trajectory-data\">";
constexpr std::string_view kDataClose = "</script>";

}  // namespace

RenderSummary emit_svg(const TrajectorySet& set, const PlotSpec& spec, const std::filesystem::path& out) {
  auto text = render_svg(set, spec);
  write_text(out, text);
  return summarize(text);
}

std::string render_html(const TrajectorySet& input, const PlotSpec& spec) {
  spec.validate();
  const TrajectorySet set = decimate(input, spec.stride);
  check_size(set);
  resolve_highlights(set, spec);

  std::ostringstream s;
  s << "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n"
    << "<title>Embedding trajectories</title>\n<style>\n"
    << "body { font-family: sans-serif; margin: 1.5em; }\n"
    << "table.meta { border-collapse: collapse; margin-bottom: 1em; }\n"
    << "table.meta td, table.meta th { border: 1px solid #cccccc; padding: 2px 8px; text-align: left; }\n"
    << "section.frame { display: inline-block; margin: 0 1em 1em 0; vertical-align: top; }\n"
    << "</style>\n</head>\n<body>\n<h1>Embedding trajectories</h1>\n<table class=\"meta\">\n";
  const auto& m = set.meta;
  auto row = [&](std::string_view k, const std::string& v) {
    s << "<tr><th>" << k << "</th><td>" << xml_escape(v) << "</td></tr>\n";
  };
  row("method", m.method);
  row("k", std::to_string(m.k));
  row("alpha", format_double(m.alpha));
  row("aggregation", m.aggregation);
  row("anchors", std::to_string(m.anchor_count));
  row("reference timestamp", std::to_string(m.reference_t));
  row("anchor fingerprint", m.anchor_fingerprint);
  row("config fingerprint", m.config_fingerprint);
  row("timestamps", std::to_string(m.timestamp_labels.size()));
  row("points", std::to_string(set.num_points()));
  for (const auto& w : m.warnings) row("warning", w);
  s << "</table>\n";

  for (std::size_t t = 0; t < m.timestamp_labels.size(); ++t) {
    s << "<section class=\"frame\">\n<h2>t = " << xml_escape(m.timestamp_labels[t]) << "</h2>\n";
    s << render_svg(set, PlotSpec{spec.width, spec.height, spec.highlights, spec.background_color,
                                  spec.background_opacity, spec.background_radius, spec.show_timestamps, 1},
                    t, false, "f" + std::to_string(t) + "-");
    s << "</section>\n";
  }

  // '<' only occurs inside JSON strings, so < keeps the payload valid
  // JSON and rules out a premature "</script>".
  std::string payload = to_json(set).dump();
  std::string escaped;
  escaped.reserve(payload.size());
  for (char c : payload) {
    if (c == '<') escaped += "\\u003c";
    else escaped += c;
  }
  s << kDataOpen << escaped << kDataClose << "\n</body>\n</html>\n";
  return s.str();
}

RenderSummary emit_html(const TrajectorySet& set, const PlotSpec& spec, const std::filesystem::path& out) {
  auto text = render_html(set, spec);
  write_text(out, text);
  return summarize(text);
}

TrajectorySet parse_html_trajectories(std::string_view html) {
  auto a = html.find(kDataOpen);
  if (a == std::string_view::npos) throw ValidationError("no embedded trajectory data");
  a += kDataOpen.size();
  auto b = html.find(kDataClose, a);
  if (b == std::string_view::npos) throw ValidationError("unterminated trajectory data");
  try {
    return trajectories_from_json(nlohmann::json::parse(html.substr(a, b - a)));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("embedded trajectory data: ") + e.what());
  }
}

void export_json(const TrajectorySet& set, const std::filesystem::path& out) {
  write_text(out, to_json(set).dump() + "\n");
}

TrajectorySet import_json(const std::filesystem::path& in) {
  std::ifstream f(in, std::ios::binary);
  if (!f) throw ValidationError("cannot read " + in.string());
  try {
    return trajectories_from_json(nlohmann::json::parse(f));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(in.string() + ": " + e.what());
  }
}

namespace {

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace

std::string to_csv(const MetricReport& report) {
  std::string out = "node,t,jaccard_n,rbo_raw,rbo_norm,arc,l1,l2\n";
  for (const auto& r : report.rows) {
    out += csv_field(report.labels.at(r.node));
    out += ',' + std::to_string(r.t);
    for (double v : {r.jaccard, r.rbo_raw, r.rbo_normalized, r.arc, r.l1, r.l2}) out += ',' + format_double(v);
    out += '\n';
  }
  return out;
}

void export_csv(const MetricReport& report, const std::filesystem::path& out) { write_text(out, to_csv(report)); }

void export_summary_json(const MetricReport& report, const std::filesystem::path& out) {
  write_text(out, report.summary_json().dump(2) + "\n");
}

}  // namespace trajviz
