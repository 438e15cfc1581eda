#include "wigp/log.hpp"

#include <cstdlib>
#include <string>

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

namespace wigp {

spdlog::logger& log() {
    static std::shared_ptr<spdlog::logger> logger = [] {
        auto sink = std::make_shared<spdlog::sinks::stderr_sink_mt>();
        auto l = std::make_shared<spdlog::logger>("wigp", sink);
        l->set_pattern("[wigp %l] %v");
        l->set_level(spdlog::level::warn);
        if (const char* env = std::getenv("WIGP_LOG")) {
            auto level = spdlog::level::from_str(env);
            // from_str maps unknown names to off; only honour names it knows.
            if (level != spdlog::level::off || std::string(env) == "off") l->set_level(level);
        }
        return l;
    }();
    return *logger;
}

}  // namespace wigp
