#pragma once

#include <map>
#include <string>
#include <vector>

#include "ca/experiment.hpp"

namespace ca {

// Flat `section.key=value` config text, `#` comments, UTF-8.
std::map<std::string, std::string> parse_config_text(const std::string& text,
                                                     const std::string& origin = "<config>");
std::map<std::string, std::string> load_config_file(const std::string& path);

// Applies `key=value` override strings on top of a parsed config.
void apply_overrides(std::map<std::string, std::string>& kv,
                     const std::vector<std::string>& overrides);

// Binds the key/value map onto an ExperimentConfig; unknown keys error.
ExperimentConfig build_experiment_config(const std::map<std::string, std::string>& kv);

}  // namespace ca
