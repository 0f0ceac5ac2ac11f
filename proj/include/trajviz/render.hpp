#pragma once

// Static outputs: SVG trajectory plots, a self-contained HTML page, and the
// trajectory JSON / metrics CSV exports.

#include "trajviz/analytics.hpp"
#include "trajviz/trajectory.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace trajviz {

struct Highlight {
  std::string label;
  std::string color;  // "#RRGGBB"; empty picks from the default palette
};

struct PlotSpec {
  int width = 800;
  int height = 600;
  std::vector<Highlight> highlights;
  std::string background_color = "#B0B0B0";
  double background_opacity = 0.4;
  double background_radius = 3.0;
  bool show_timestamps = false;
  std::size_t stride = 1;  // keep every stride-th point (and always the last)

  void validate() const;  // throws UsageError
};

const std::vector<std::string>& default_palette();

inline constexpr std::size_t kMaxRenderedPoints = 1'000'000;

/// Uniform-scale map from a data bounding box onto the canvas with a 5%
/// margin, centred (letterboxed) and with the y axis flipped.
class CanvasMapping {
 public:
  CanvasMapping(double min_x, double min_y, double max_x, double max_y, int width, int height);
  Point2 map(double x, double y) const;
  double scale() const noexcept { return scale_; }

 private:
  double cx_ = 0, cy_ = 0, scale_ = 1;
  double width_ = 0, height_ = 0;
};

struct RenderSummary {
  std::size_t polylines = 0;
  std::size_t circles = 0;
  std::size_t frames = 0;
  std::size_t bytes = 0;
};

/// SVG for the whole series, or only timestamps <= up_to when given. With
/// `standalone` false the XML prolog and namespace are omitted (inline use).
std::string render_svg(const TrajectorySet& set, const PlotSpec& spec, std::optional<std::size_t> up_to = std::nullopt,
                       bool standalone = true, const std::string& id_prefix = "");
RenderSummary emit_svg(const TrajectorySet& set, const PlotSpec& spec, const std::filesystem::path& out);

std::string render_html(const TrajectorySet& set, const PlotSpec& spec);
RenderSummary emit_html(const TrajectorySet& set, const PlotSpec& spec, const std::filesystem::path& out);

/// Recovers the TrajectorySet embedded in a page produced by render_html.
TrajectorySet parse_html_trajectories(std::string_view html);

/// Keeps points 0, stride, 2*stride, ... plus the last point of each node.
TrajectorySet decimate(const TrajectorySet& set, std::size_t stride);

void export_json(const TrajectorySet& set, const std::filesystem::path& out);
TrajectorySet import_json(const std::filesystem::path& in);

std::string to_csv(const MetricReport& report);
void export_csv(const MetricReport& report, const std::filesystem::path& out);
void export_summary_json(const MetricReport& report, const std::filesystem::path& out);

}  // namespace trajviz
