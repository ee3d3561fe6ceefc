#ifndef ATOMREAD_CLI_MANIFEST_HPP
#define ATOMREAD_CLI_MANIFEST_HPP

#include <string>
#include <vector>

#include <json.hpp>

namespace atomread::cli {

// One manifest per CLI run: command, config hash, input/output artifact
// hashes, wall time, tool version.
class ManifestWriter {
public:
    ManifestWriter(std::string command, const nlohmann::json& config);

    void add_input(const std::string& path);
    void add_output(const std::string& path);
    // Writes <report_dir>/<command>.manifest.json and returns the path.
    std::string write(const std::string& report_dir);

private:
    std::string command_;
    std::string config_hash_;
    std::vector<std::string> inputs_, outputs_;
    double start_time_;
};

std::string hash_path(const std::string& path);  // file or directory

}  // namespace atomread::cli

#endif
