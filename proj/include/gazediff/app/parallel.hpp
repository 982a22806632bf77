#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace gazediff {

/// Runs fn(i) for i in [0, count) on up to `workers` threads. Returns one message
/// per item: empty on success, the exception text on failure. Item order of the
/// result is fixed regardless of scheduling.
template <class Fn>
std::vector<std::string> parallel_for(std::size_t count, std::size_t workers, Fn&& fn) {
  std::vector<std::string> errors(count);
  std::atomic<std::size_t> next{0};
  auto run = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < count;) {
      try {
        fn(i);
      } catch (const std::exception& e) {
        errors[i] = e.what();
        if (errors[i].empty()) errors[i] = "unknown error";
      }
    }
  };
  workers = std::max<std::size_t>(1, std::min(workers, count));
  if (workers == 1) {
    run();
    return errors;
  }
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run);
  for (auto& t : pool) t.join();
  return errors;
}

/// Stable 64-bit seed for a named item: FNV-1a of the name mixed with a base seed.
inline std::uint64_t item_seed(std::uint64_t base, std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : name) h = (h ^ c) * 0x100000001b3ull;
  std::uint64_t z = h ^ (base + 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace gazediff
