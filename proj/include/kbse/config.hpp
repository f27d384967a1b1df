#pragma once

#include <map>
#include <string>

#include "kbse/loop.hpp"

namespace kbse {

// Flat "[section] / key = value" text config. '#' and ';' start comments.
// Unknown sections or keys are rejected with the offending name.
std::map<std::string, std::string> parse_config_text(const std::string& text);

RunConfig run_config_from_values(const std::map<std::string, std::string>& values);
RunConfig run_config_from_file(const std::string& path);

}  // namespace kbse
