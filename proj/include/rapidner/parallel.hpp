#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace rapidner {

// Applies `fn` to every element, splitting the input into contiguous chunks
// over `threads` workers. Output order always matches input order.
template <typename In, typename Fn>
auto parallel_map(const std::vector<In>& input, Fn fn, unsigned threads)
    -> std::vector<decltype(fn(input.front()))> {
  using Out = decltype(fn(input.front()));
  std::vector<Out> output(input.size());
  if (threads <= 1 || input.size() < 2 * static_cast<std::size_t>(threads)) {
    for (std::size_t i = 0; i < input.size(); ++i) output[i] = fn(input[i]);
    return output;
  }
  const std::size_t chunk = (input.size() + threads - 1) / threads;
  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors(threads);
  for (unsigned t = 0; t < threads; ++t) {
    const std::size_t begin = t * chunk;
    const std::size_t end = std::min(input.size(), begin + chunk);
    if (begin >= end) break;
    workers.emplace_back([&, t, begin, end] {
      try {
        for (std::size_t i = begin; i < end; ++i) output[i] = fn(input[i]);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return output;
}

}  // namespace rapidner
