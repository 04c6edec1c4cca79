#pragma once

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace camel {

enum class LogLevel { Error = 0, Info = 1, Debug = 2 };

// Level comes from CAMEL_LOG_LEVEL (error|info|debug), default info.
inline LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("CAMEL_LOG_LEVEL");
        if (!env) return LogLevel::Info;
        if (std::strcmp(env, "error") == 0) return LogLevel::Error;
        if (std::strcmp(env, "debug") == 0) return LogLevel::Debug;
        return LogLevel::Info;
    }();
    return level;
}

}  // namespace camel

#define LOG_ERROR(...)                                    \
    do {                                                  \
        std::fprintf(stderr, "[camel error] " __VA_ARGS__); \
        std::fprintf(stderr, "\n");                       \
    } while (0)

#define LOG_INFO(...)                                            \
    do {                                                         \
        if (camel::log_level() >= camel::LogLevel::Info) {       \
            std::fprintf(stderr, "[camel] " __VA_ARGS__);        \
            std::fprintf(stderr, "\n");                          \
        }                                                        \
    } while (0)

#define LOG_DEBUG(...)                                           \
    do {                                                         \
        if (camel::log_level() >= camel::LogLevel::Debug) {      \
            std::fprintf(stderr, "[camel debug] " __VA_ARGS__);  \
            std::fprintf(stderr, "\n");                          \
        }                                                        \
    } while (0)
