#include "dcmgnn/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

#include "dcmgnn/common.hpp"

namespace dcmgnn {
namespace {
std::atomic<int> g_workers{1};
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(what) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()) + ")");
  }
}

void set_num_workers(int workers) { g_workers = std::max(1, workers); }

int num_workers() { return g_workers; }

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn) {
  const auto workers = static_cast<std::size_t>(g_workers.load());
  if (workers <= 1 || n < 2 * workers) {
    fn(0, n);
    return;
  }
  const std::size_t chunk = (n + workers - 1) / workers;
  std::vector<std::jthread> threads;
  threads.reserve(workers);
  for (std::size_t begin = 0; begin < n; begin += chunk) {
    const std::size_t end = std::min(n, begin + chunk);
    threads.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
}

}  // namespace dcmgnn
