#pragma once

#include <algorithm>
#include <atomic>
#include <functional>
#include <thread>
#include <vector>

namespace ssprep::cli {

// out[i] = f(in[i]) on up to `workers` threads; order follows the input.
// f must not throw; per-point failures are encoded in its result.
template <class In, class Out>
std::vector<Out> parallel_map(const std::vector<In>& in, const std::function<Out(const In&)>& f, int workers) {
  std::vector<Out> out(in.size());
  const auto threads = static_cast<size_t>(std::clamp<long>(workers, 1, static_cast<long>(std::max<size_t>(in.size(), 1))));
  if (threads <= 1) {
    for (size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
    return out;
  }
  std::atomic<size_t> next{0};
  {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (size_t t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (size_t i = next++; i < in.size(); i = next++) out[i] = f(in[i]);
      });
  }  // joined here
  return out;
}

}  // namespace ssprep::cli
