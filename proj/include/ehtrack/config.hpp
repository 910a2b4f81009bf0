// YAML experiment descriptions.
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ehtrack/experiment.hpp"

namespace ehtrack {

/// Parses a YAML document into one or more validated experiments. A
/// `preset: <name>` key starts from that figure preset; every other key then
/// overrides the corresponding field of each sub-experiment. Throws
/// ConfigError with the source name and offending key.
std::vector<ExperimentSpec> parse_experiments(const std::string& text, const std::string& source = "<config>");
std::vector<ExperimentSpec> load_experiments(const std::filesystem::path& path);

/// Applies the keys of `text` on top of existing experiments.
std::vector<ExperimentSpec> apply_overrides(std::vector<ExperimentSpec> specs, const std::string& text,
                                            const std::string& source = "<config>");

}  // namespace ehtrack
