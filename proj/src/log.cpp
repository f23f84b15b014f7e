#include "armlab/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace armlab {

namespace {
std::atomic<bool> g_quiet{false};
std::mutex g_mutex;
}  // namespace

void log_warning(std::string_view message) {
  std::lock_guard lock(g_mutex);
  std::cerr << "[armlab] warning: " << message << '\n';
}

void log_info(std::string_view message) {
  if (g_quiet) return;
  std::lock_guard lock(g_mutex);
  std::cerr << "[armlab] " << message << '\n';
}

void set_quiet(bool quiet) { g_quiet = quiet; }

}  // namespace armlab
