#pragma once

#include <functional>
#include <string>
#include <vector>

#include "nrl/experiments.hpp"

namespace nrl {

struct RunConfig {
  std::vector<ExperimentConfig> experiments;
};

// Parses a config document {"experiments": [...]}. With paper_scale, each
// experiment's "paper_scale" object is merge-patched over it first. Errors are
// Error(kConfig) naming the offending experiment and field.
RunConfig parse_run_config(const std::string& json_text, bool paper_scale = false);
RunConfig load_run_config(const std::string& path, bool paper_scale = false);

// Single experiment object, same schema as one entry of "experiments".
ExperimentConfig parse_experiment(const std::string& json_text);

struct ExperimentOutcome {
  std::string id;
  std::string kind;
  std::string status;  // "ok", "diverged-cells: k", or "error: ..."
  std::size_t errored_cells = 0;
  std::size_t diverged_cells = 0;
  std::vector<std::string> files;
};

struct RunReport {
  std::vector<ExperimentOutcome> experiments;
  std::size_t errored_cells = 0;
  bool any_error() const;
};

using LogFn = std::function<void(const std::string&)>;

// Executes every experiment, writes its CSVs into out_dir and finally
// manifest.json (atomically).
RunReport run_experiments(const RunConfig& config, const std::string& config_path, const std::string& out_dir,
                          const RunOptions& opts, const LogFn& log = {});

}  // namespace nrl
