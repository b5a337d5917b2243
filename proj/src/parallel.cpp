#include "smolhom/parallel.hpp"

#include <algorithm>
#include <memory>

namespace smolhom {

namespace {
std::unique_ptr<ThreadPool> g_pool;
int g_workers = 0;
}  // namespace

ThreadPool& global_pool() {
  if (!g_pool) {
    const int hw = static_cast<int>(std::thread::hardware_concurrency());
    g_pool = std::make_unique<ThreadPool>(g_workers > 0 ? g_workers : std::max(1, hw));
  }
  return *g_pool;
}

void set_global_threads(int workers) {
  g_workers = workers;
  g_pool.reset();
}

}  // namespace smolhom
