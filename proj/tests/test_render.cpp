#include "trajviz/render.hpp"

#include "fixtures.hpp"

#include <gmock/gmock.h>

#include <cmath>
#include <regex>

using namespace trajviz;
using ::testing::HasSubstr;

namespace {

TrajectorySet small_set() {
  TrajectorySet s;
  s.meta.method = "pca";
  s.meta.k = 2;
  s.meta.alpha = 0.3;
  s.meta.aggregation = "mean";
  s.meta.anchor_count = 3;
  s.meta.timestamp_labels = {"2020", "2021", "2022"};
  s.labels = {"a", "b", "c", "d"};
  s.points = {{{0, 0, 0}, {1, 1, 1}},
              {{0, 2, 0}, {1, 2, 1}, {2, 2, 2}},
              {{0, 0, 2}},
              {{2, -1, -1}}};
  s.anchors = {{"a", 0, 0}, {"b", 2, 0}, {"c", 0, 2}};
  return s;
}

PlotSpec highlight(std::vector<std::string> labels) {
  PlotSpec spec;
  for (auto& l : labels) spec.highlights.push_back({l, ""});
  return spec;
}

std::vector<std::string> elements_of(const std::string& svg) {
  std::vector<std::string> elements;
  std::string error;
  EXPECT_TRUE(oracle::xml_well_formed(svg, elements, error)) << error;
  return elements;
}

std::vector<std::pair<double, double>> polyline_points(const std::string& svg) {
  static const std::regex re("<polyline[^>]*points=\"([^\"]*)\"");
  std::smatch m;
  std::vector<std::pair<double, double>> out;
  if (!std::regex_search(svg, m, re)) return out;
  std::istringstream in(m[1].str());
  std::string pair;
  while (in >> pair) {
    const auto comma = pair.find(',');
    out.emplace_back(std::stod(pair.substr(0, comma)), std::stod(pair.substr(comma + 1)));
  }
  return out;
}

std::size_t count(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

}  // namespace

TEST(Svg, TwoPointTrajectoryIsOnePolyline) {
  const auto svg = render_svg(small_set(), highlight({"a"}));
  EXPECT_EQ(count(svg, "<polyline"), 1u);
  EXPECT_EQ(polyline_points(svg).size(), 2u);
  EXPECT_EQ(count(svg, "<circle"), 3u);  // the anchors
  EXPECT_THAT(svg, HasSubstr(">a</text>"));
}

TEST(Svg, NoHighlightsDrawsOnlyAnchors) {
  const auto svg = render_svg(small_set(), PlotSpec{});
  EXPECT_EQ(count(svg, "<polyline"), 0u);
  EXPECT_EQ(count(svg, "<circle"), 3u);
  const auto el = elements_of(svg);
  EXPECT_EQ(el.front(), "svg");
}

TEST(Svg, SinglePointTrajectoryIsADot) {
  const auto svg = render_svg(small_set(), highlight({"c"}));
  EXPECT_EQ(count(svg, "<polyline"), 0u);
  EXPECT_EQ(count(svg, "<circle"), 4u);
}

TEST(Svg, CoincidentPointsStayFinite) {
  TrajectorySet s = small_set();
  s.anchors = {{"a", 1, 1}};
  s.points = {{{0, 1, 1}, {1, 1, 1}}, {}, {}, {}};
  const auto svg = render_svg(s, highlight({"a"}));
  const auto pts = polyline_points(svg);
  ASSERT_EQ(pts.size(), 2u);
  for (const auto& [x, y] : pts) {
    EXPECT_DOUBLE_EQ(x, 400);
    EXPECT_DOUBLE_EQ(y, 300);
  }
  EXPECT_THAT(svg, ::testing::Not(HasSubstr("nan")));
  EXPECT_THAT(svg, ::testing::Not(HasSubstr("inf")));
}

TEST(Svg, WellFormedWithExpectedElements) {
  auto spec = highlight({"a", "b", "d"});
  spec.show_timestamps = true;
  const auto svg = render_svg(small_set(), spec);
  EXPECT_TRUE(svg.starts_with("<?xml"));
  const auto el = elements_of(svg);
  const std::set<std::string> known{"svg", "defs", "marker", "path", "rect", "g", "circle", "polyline", "text"};
  for (const auto& e : el) EXPECT_TRUE(known.count(e)) << e;
  EXPECT_EQ(std::count(el.begin(), el.end(), "marker"), 3);
  EXPECT_EQ(std::count(el.begin(), el.end(), "text"), 3 + 2 + 3 + 1);  // labels + timestamps
}

TEST(Svg, Deterministic) {
  const auto spec = highlight({"a", "b"});
  EXPECT_EQ(render_svg(small_set(), spec), render_svg(small_set(), spec));
}

TEST(Svg, MappingPreservesDistanceRatios) {
  SplitMix64 rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const double x0 = rng.normal() * 50, y0 = rng.normal() * 50;
    const double w = 0.01 + rng.uniform() * 100, h = 0.01 + rng.uniform() * 100;
    const CanvasMapping map(x0, y0, x0 + w, y0 + h, 100 + static_cast<int>(rng.below(1500)),
                            100 + static_cast<int>(rng.below(1500)));
    std::array<Point2, 3> data, canvas;
    for (std::size_t k = 0; k < 3; ++k) {
      data[k] = {x0 + rng.uniform() * w, y0 + rng.uniform() * h};
      canvas[k] = map.map(data[k][0], data[k][1]);
    }
    auto dist = [](const Point2& a, const Point2& b) { return std::hypot(a[0] - b[0], a[1] - b[1]); };
    const double ratio_data = dist(data[0], data[1]) / dist(data[0], data[2]);
    const double ratio_canvas = dist(canvas[0], canvas[1]) / dist(canvas[0], canvas[2]);
    EXPECT_NEAR(ratio_canvas, ratio_data, 1e-6 * ratio_data);
  }
}

TEST(Svg, MappingKeepsMarginAndFlipsY) {
  const CanvasMapping map(0, 0, 10, 10, 200, 100);
  const auto lo = map.map(0, 0), hi = map.map(10, 10);
  EXPECT_DOUBLE_EQ(lo[1], 95);  // bottom margin
  EXPECT_DOUBLE_EQ(hi[1], 5);
  EXPECT_DOUBLE_EQ(lo[0], 55);  // letterboxed horizontally
  EXPECT_DOUBLE_EQ(hi[0], 145);
}

TEST(Svg, Errors) {
  EXPECT_THROW(render_svg(small_set(), highlight({"zz"})), ValidationError);
  TrajectorySet empty;
  empty.labels = {"a"};
  empty.points = {{}};
  try {
    render_svg(empty, PlotSpec{});
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_THAT(e.what(), HasSubstr("no positions"));
  }
  auto spec = PlotSpec{};
  spec.background_color = "grey";
  EXPECT_THROW(spec.validate(), UsageError);
}

TEST(Svg, TooManyPointsAskForDecimation) {
  TrajectorySet s;
  s.labels = {"a"};
  s.points.resize(1);
  s.points[0].resize(kMaxRenderedPoints + 1);
  for (std::size_t t = 0; t < s.points[0].size(); ++t) s.points[0][t] = {t, static_cast<double>(t), 0};
  try {
    render_svg(s, PlotSpec{});
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_THAT(e.what(), HasSubstr("decimate first"));
  }
  const auto d = decimate(s, 3);
  EXPECT_EQ(d.points[0].size(), 333'335u);  // t = 0, 3, ..., 999999 plus the final t = 1000000
  EXPECT_EQ(d.points[0].back().t, kMaxRenderedPoints);
  EXPECT_NO_THROW(render_svg(d, PlotSpec{}));
}

TEST(Decimate, KeepsStrideAndLast) {
  const auto d = decimate(small_set(), 2);
  ASSERT_EQ(d.points[1].size(), 2u);
  EXPECT_EQ(d.points[1][0].t, 0u);
  EXPECT_EQ(d.points[1][1].t, 2u);
  ASSERT_EQ(d.points[0].size(), 2u);  // last point always kept
  EXPECT_EQ(decimate(small_set(), 1), small_set());
}

// --- HTML ------------------------------------------------------------------------

TEST(Html, SelfContainedAndRoundTrips) {
  auto s = small_set();
  s.labels[3] = "</script><b>";
  const auto html = render_html(s, highlight({"a", "b"}));
  EXPECT_THAT(html, ::testing::Not(HasSubstr("http://")));
  EXPECT_THAT(html, ::testing::Not(HasSubstr("https://")));
  EXPECT_THAT(html, ::testing::Not(HasSubstr("src=")));
  EXPECT_EQ(count(html, "<section class=\"frame\">"), 3u);
  EXPECT_EQ(count(html, "</script>"), 1u);
  EXPECT_EQ(parse_html_trajectories(html), s);
  EXPECT_THROW(parse_html_trajectories("<html></html>"), ValidationError);
}

TEST(Html, FramesShowGrowingPrefixes) {
  const auto html = render_html(small_set(), highlight({"b"}));
  // b has 3 points: a dot at t=0, then polylines of 2 and 3 points.
  EXPECT_EQ(count(html, "<polyline"), 2u);
  EXPECT_THAT(html, HasSubstr("id=\"f0-arrow-0\""));
  EXPECT_THAT(html, HasSubstr("id=\"f2-arrow-0\""));
}

// --- JSON / CSV ------------------------------------------------------------------

TEST(Exports, TrajectoryJsonIsBitExact) {
  SplitMix64 rng(2);
  auto s = small_set();
  for (auto& pts : s.points)
    for (auto& p : pts) {
      p.x = rng.normal() * 1e-3;
      p.y = rng.normal() * 1e5;
    }
  const auto dir = fixtures::scratch_dir();
  export_json(s, dir / "t.json");
  EXPECT_EQ(import_json(dir / "t.json"), s);
  const auto first = fixtures::read_file(dir / "t.json");
  export_json(import_json(dir / "t.json"), dir / "u.json");
  EXPECT_EQ(fixtures::read_file(dir / "u.json"), first);
}

TEST(Exports, CsvShape) {
  MetricReport empty;
  EXPECT_EQ(to_csv(empty), "node,t,jaccard_n,rbo_raw,rbo_norm,arc,l1,l2\n");

  MetricReport r;
  r.labels = {"plain", "with,comma"};
  r.rows = {{0, 1, 1, 0.5, 0.75, 0, 1, 2}, {1, 1, 0.5, 0.25, 0.3, 0.1, 3, 4}};
  const auto csv = to_csv(r);
  EXPECT_EQ(count(csv, "\n"), 3u);
  EXPECT_THAT(csv, HasSubstr("\nplain,1,1,0.5,0.75,0,1,2\n"));
  EXPECT_THAT(csv, HasSubstr("\n\"with,comma\",1,"));
}
