#include "trajviz/pipeline.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <iostream>

namespace trajviz {

namespace fs = std::filesystem;

int run_cli(const std::vector<std::string>& args, const std::map<std::string, std::string>& env, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Embedding trajectories for discrete-time dynamic graphs", "trajviz"};
  app.set_version_flag("--version", TRAJVIZ_VERSION);
  app.fallthrough();
  app.require_subcommand(0, 1);

  std::string config_path;
  bool print_config = false;
  app.add_option("--config", config_path, "JSON config file (or a *.provenance.json sidecar)");
  app.add_flag("--print-config", print_config, "print the effective configuration and exit");

  // std::map keeps element addresses stable while CLI11 holds references.
  std::map<std::string, std::string> scalars;
  std::map<std::string, std::vector<std::string>> lists;
  std::map<std::string, bool> bools;
  std::map<std::string, CLI::Option*> options;
  for (const auto& opt : option_table()) {
    const auto name = "--" + opt.flag;
    switch (opt.type) {
      case OptionType::boolean: options[opt.flag] = app.add_flag(name, bools[opt.flag], opt.help); break;
      case OptionType::string_list:
      case OptionType::path_list: options[opt.flag] = app.add_option(name, lists[opt.flag], opt.help); break;
      default: options[opt.flag] = app.add_option(name, scalars[opt.flag], opt.help);
    }
  }

  struct Stage {
    const char* name;
    const char* help;
    Artifacts (*run)(const PipelineConfig&);
  };
  const Stage stages[] = {
      {"ingest", "parse snapshots or an event log into graph.json", cmd_ingest},
      {"embed", "train (or import) per-snapshot embeddings", cmd_embed},
      {"trajectory", "select anchors, project, and align trajectories", cmd_trajectory},
      {"analyze", "structural-change metrics to metrics.csv / metrics.json", cmd_analyze},
      {"render", "draw plot.svg / plot.html from trajectories.json", cmd_render},
      {"pipeline", "run every stage in order", cmd_pipeline},
  };
  std::string pipeline_config;
  for (const auto& s : stages) {
    auto* sub = app.add_subcommand(s.name, s.help);
    if (std::string_view(s.name) == "pipeline")
      sub->add_option("config", pipeline_config, "config file (same as --config)");
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 1;
  }

  try {
    if (!pipeline_config.empty()) {
      if (!config_path.empty() && config_path != pipeline_config)
        throw UsageError("pipeline: give the config either positionally or with --config, not both");
      config_path = pipeline_config;
    }

    nlohmann::json config = config_path.empty() ? default_config() : read_config_file(config_path);
    apply_overrides(config, environment_overrides(env));
    RawOverrides flags;
    for (const auto& opt : option_table()) {
      if (options[opt.flag]->count() == 0) continue;
      switch (opt.type) {
        case OptionType::boolean: flags[opt.flag] = {bools[opt.flag] ? "true" : "false"}; break;
        case OptionType::string_list:
        case OptionType::path_list: flags[opt.flag] = lists[opt.flag]; break;
        default: flags[opt.flag] = {scalars[opt.flag]};
      }
    }
    apply_overrides(config, flags);
    resolve_paths(config, fs::current_path());

    if (print_config) {
      out << config.dump(2) << '\n';
      return 0;
    }
    const auto subs = app.get_subcommands();
    if (subs.empty()) {
      err << app.help();
      return 1;
    }

    const auto cfg = PipelineConfig::from_json(config);
    const auto name = subs.front()->get_name();
    const auto* stage = std::find_if(std::begin(stages), std::end(stages), [&](const Stage& s) { return name == s.name; });
    for (const auto& path : stage->run(cfg)) out << path.string() << '\n';
    return 0;
  } catch (const std::exception& e) {
    err << "trajviz: error: " << e.what() << '\n';
    return exit_code_for(e);
  }
}

}  // namespace trajviz
