#pragma once

// Stage orchestration for the command-line tool: effective configuration
// (defaults < config file < TRAJVIZ_* environment < flags), the stage
// commands, and provenance sidecars.

#include "trajviz/analytics.hpp"
#include "trajviz/embedding.hpp"
#include "trajviz/graph.hpp"
#include "trajviz/projection.hpp"
#include "trajviz/render.hpp"
#include "trajviz/trajectory.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace trajviz {

enum class OptionType { string, path, path_list, string_list, uint, real, boolean };

/// One command-line flag and the config key it overrides. The environment
/// variable is TRAJVIZ_ followed by the flag name upper-cased with '-' -> '_'.
struct OptionSpec {
  std::string flag;          // without leading dashes
  std::string json_pointer;  // e.g. "/alignment/k"
  OptionType type;
  std::string help;
};

const std::vector<OptionSpec>& option_table();
std::string env_name(const OptionSpec& opt);

nlohmann::json default_config();

/// Reads a config file. A provenance sidecar is accepted too: its recorded
/// configuration is returned. Relative paths resolve against the file's
/// directory.
nlohmann::json read_config_file(const std::filesystem::path& file);

/// Layers raw string overrides (from the environment, then flags) onto a
/// config. Values are parsed according to the option type; list options
/// take comma-separated values from the environment.
using RawOverrides = std::map<std::string, std::vector<std::string>>;  // flag -> values
void apply_overrides(nlohmann::json& config, const RawOverrides& values);
RawOverrides environment_overrides(const std::map<std::string, std::string>& env);

/// Makes every relative path-valued key absolute against `base`.
void resolve_paths(nlohmann::json& config, const std::filesystem::path& base);

struct InputConfig {
  std::optional<std::filesystem::path> manifest;
  std::vector<std::filesystem::path> snapshots;
  std::optional<std::filesystem::path> event_log;
  std::optional<double> interval;
  double origin = 0.0;
  bool directed = false;
};

struct OutputConfig {
  bool svg = true;
  bool html = true;
  bool metrics_json = true;
  EmbeddingFormat embeddings_format = EmbeddingFormat::text;
};

struct PipelineConfig {
  std::uint64_t seed = 42;
  unsigned threads = 0;
  std::filesystem::path out_dir;
  InputConfig input;
  std::optional<TrainingConfig> training;                    // train ...
  std::optional<std::filesystem::path> external_embeddings;  // ... xor load
  ProjectionConfig projection;
  AlignmentConfig alignment;
  MetricConfig metrics;
  PlotSpec plot;
  OutputConfig outputs;
  std::filesystem::path graph_path, embeddings_dir, trajectories_path;

  nlohmann::json effective;  // the full configuration this was parsed from

  /// Strict: unknown keys, wrong types and violated invariants are UsageErrors.
  static PipelineConfig from_json(const nlohmann::json& config);
};

/// Paths of every artifact a stage wrote (sidecars excluded).
using Artifacts = std::vector<std::filesystem::path>;

Artifacts cmd_ingest(const PipelineConfig& cfg);
Artifacts cmd_embed(const PipelineConfig& cfg);
Artifacts cmd_trajectory(const PipelineConfig& cfg);
Artifacts cmd_analyze(const PipelineConfig& cfg);
Artifacts cmd_render(const PipelineConfig& cfg);
Artifacts cmd_pipeline(const PipelineConfig& cfg);

std::filesystem::path sidecar_path(const std::filesystem::path& artifact);

/// Exit code for an exception escaping a command: 1 usage, 2 validation,
/// 3 numeric.
int exit_code_for(const std::exception& e);

/// The command-line front end. `args` excludes the program name; `env` holds
/// the process environment (only TRAJVIZ_* entries matter).
int run_cli(const std::vector<std::string>& args, const std::map<std::string, std::string>& env, std::ostream& out,
            std::ostream& err);

}  // namespace trajviz
