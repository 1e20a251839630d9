#include "trialsim/io/session_log.hpp"

#include "trialsim/version.hpp"

#include "json.hpp"

#include <Eigen/Core>
#include <boost/version.hpp>

#include <ctime>
#include <fstream>
#include <thread>

namespace trialsim::io {

namespace {

std::string utc_now() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

SessionLog::SessionLog(std::string command, std::vector<std::string> argv)
    : command_(std::move(command)),
      argv_(std::move(argv)),
      started_(utc_now()),
      start_(std::chrono::steady_clock::now()),
      last_(start_) {}

void SessionLog::set(const std::string& key, const std::string& value) { fields_.emplace_back(key, value); }

void SessionLog::mark(const std::string& step) {
    const auto now = std::chrono::steady_clock::now();
    timings_.emplace_back(step, std::chrono::duration<double>(now - last_).count());
    last_ = now;
}

void SessionLog::write(const std::filesystem::path& path, bool ok, const std::string& error) const {
    nlohmann::json j;
    j["command"] = command_;
    j["argv"] = argv_;
    j["started_utc"] = started_;
    j["finished_utc"] = utc_now();
    j["ok"] = ok;
    if (!error.empty()) j["error"] = error;
    j["versions"] = {{"trialsim", kEngineVersion},
                     {"compiler", __VERSION__},
                     {"cplusplus", __cplusplus},
                     {"boost", BOOST_LIB_VERSION},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                   std::to_string(EIGEN_MINOR_VERSION)}};
    j["hardware_threads"] = std::thread::hardware_concurrency();
    for (const auto& [k, v] : fields_) j["settings"][k] = v;
    for (const auto& [k, v] : timings_) j["timings_seconds"][k] = v;
    j["total_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (out) out << j.dump(2) << '\n';
}

}  // namespace trialsim::io
