#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace trialsim::io {

/// Run record: versions, command line, seeds and per-step timings, written as JSON at the end.
class SessionLog {
public:
    SessionLog(std::string command, std::vector<std::string> argv);

    void set(const std::string& key, const std::string& value);
    /// Records the seconds elapsed since the previous mark (or construction).
    void mark(const std::string& step);
    void write(const std::filesystem::path& path, bool ok, const std::string& error = {}) const;

private:
    std::string command_;
    std::vector<std::string> argv_;
    std::string started_;
    std::vector<std::pair<std::string, std::string>> fields_;
    std::vector<std::pair<std::string, double>> timings_;
    std::chrono::steady_clock::time_point start_;
    std::chrono::steady_clock::time_point last_;
};

}  // namespace trialsim::io
