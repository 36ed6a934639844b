#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace carb {

// Flat key-value config with [section] headers; keys are exposed as
// "section.key" ("" section for keys above the first header).
std::map<std::string, std::string> parse_config_file(const std::string& path);
std::map<std::string, std::string> parse_config_text(const std::string& text);

// One manifest per run, written next to the outputs. Re-running a command
// from its manifest alone reproduces the result files byte-for-byte
// (timestamps excluded).
struct RunManifest {
    std::string command;
    nlohmann::json config = nlohmann::json::object();
    nlohmann::json seeds = nlohmann::json::object();
    std::vector<std::string> backends;
    std::string toolkit_version;
    std::string started_at;
    std::string finished_at;
    std::vector<std::string> output_paths;

    void write(const std::string& path) const;
};

std::string toolkit_version();
std::string timestamp_utc();

}  // namespace carb
