#include "atomread/cli/manifest.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>

#include "atomread/core/checksum.hpp"

namespace fs = std::filesystem;

namespace atomread::cli {

namespace {
double now_s() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}
}  // namespace

std::string hash_path(const std::string& path) {
    if (fs::is_directory(path)) {
        // Hash of (name, file-hash) pairs in sorted order.
        std::vector<std::string> entries;
        for (const auto& e : fs::recursive_directory_iterator(path))
            if (e.is_regular_file())
                entries.push_back(e.path().string());
        std::sort(entries.begin(), entries.end());
        std::string acc;
        for (const auto& e : entries)
            acc += fs::path(e).filename().string() + ":" + fnv1a64_file_hex(e) + ";";
        return fnv1a64_hex(acc.data(), acc.size());
    }
    return fnv1a64_file_hex(path);
}

ManifestWriter::ManifestWriter(std::string command, const nlohmann::json& config)
    : command_(std::move(command)), start_time_(now_s()) {
    const std::string dump = config.dump();
    config_hash_ = fnv1a64_hex(dump.data(), dump.size());
}

void ManifestWriter::add_input(const std::string& path) { inputs_.push_back(path); }
void ManifestWriter::add_output(const std::string& path) { outputs_.push_back(path); }

std::string ManifestWriter::write(const std::string& report_dir) {
    fs::create_directories(report_dir);
    nlohmann::json m;
    m["command"] = command_;
    m["config_hash"] = config_hash_;
    m["tool_version"] = "atomread 0.1.0";
    m["wall_time_s"] = now_s() - start_time_;
    nlohmann::json in = nlohmann::json::object(), out = nlohmann::json::object();
    for (const auto& p : inputs_)
        in[p] = hash_path(p);
    for (const auto& p : outputs_)
        out[p] = hash_path(p);
    m["inputs"] = std::move(in);
    m["outputs"] = std::move(out);

    const std::string path =
        (fs::path(report_dir) / (command_ + ".manifest.json")).string();
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f << m.dump(2) << "\n";
    return path;
}

}  // namespace atomread::cli
