#include "macsvm/common.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>

namespace macsvm {

namespace {
std::atomic<int> g_level{1};
std::mutex g_log_mutex;
}  // namespace

void set_log_level(int level) { g_level = level; }
int log_level() { return g_level; }

void log_message(int level, const std::string& msg) {
  if (level > g_level || level <= 0) return;
  std::lock_guard lock(g_log_mutex);
  std::cerr << "macsvm: " << msg << '\n';
}

int default_thread_count() {
  if (const char* env = std::getenv("MACSVM_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return 1;
}

}  // namespace macsvm
