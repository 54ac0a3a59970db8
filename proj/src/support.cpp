#include <atomic>
#include <cstdlib>
#include <memory>

#include <spdlog/sinks/stdout_color_sinks.h>

#include "sfm/log.hpp"
#include "sfm/parallel.hpp"
#include "sfm/random.hpp"

namespace sfm {

namespace {

std::atomic<std::size_t> g_workers{1};

std::shared_ptr<spdlog::logger> make_logger() {
    auto logger = spdlog::stderr_color_mt("sfm");
    logger->set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
    spdlog::level::level_enum level = spdlog::level::warn;
    if (const char* env = std::getenv("SFM_LOG"); env != nullptr && *env != '\0') {
        level = spdlog::level::from_str(env);
    }
    logger->set_level(level);
    return logger;
}

}  // namespace

std::size_t worker_count() noexcept { return g_workers.load(std::memory_order_relaxed); }

void set_worker_count(std::size_t n) noexcept { g_workers.store(n == 0 ? 1 : n, std::memory_order_relaxed); }

spdlog::logger& log() {
    static std::shared_ptr<spdlog::logger> logger = make_logger();
    return *logger;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t counter) noexcept {
    // splitmix64 finaliser over (master, counter)
    std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (counter + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace sfm
