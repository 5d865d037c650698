#include "listrecon/parallel.hpp"

#include <cstdlib>
#include <string>
#include <thread>

namespace listrecon {

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("LISTRECON_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

std::vector<std::pair<std::size_t, std::size_t>> split_range(std::size_t n,
                                                             int workers) {
  if (workers < 1) workers = 1;
  std::vector<std::pair<std::size_t, std::size_t>> slices;
  slices.reserve(static_cast<std::size_t>(workers));
  std::size_t w = static_cast<std::size_t>(workers);
  std::size_t chunk = n / w;
  std::size_t rem = n % w;
  std::size_t begin = 0;
  for (std::size_t i = 0; i < w; ++i) {
    std::size_t len = chunk + (i < rem ? 1 : 0);
    slices.emplace_back(begin, begin + len);
    begin += len;
  }
  return slices;
}

void parallel_slices(
    std::size_t n, int workers,
    const std::function<void(int, std::size_t, std::size_t)>& body) {
  auto slices = split_range(n, workers);
  if (slices.size() == 1) {
    body(0, slices[0].first, slices[0].second);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(slices.size() - 1);
  for (std::size_t i = 1; i < slices.size(); ++i) {
    pool.emplace_back([&, i] {
      body(static_cast<int>(i), slices[i].first, slices[i].second);
    });
  }
  body(0, slices[0].first, slices[0].second);
  for (auto& t : pool) t.join();
}

}  // namespace listrecon
